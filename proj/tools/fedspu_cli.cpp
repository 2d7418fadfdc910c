#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedspu/report.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using namespace fedspu;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<double> alpha;
    bool es = false;
};

ExperimentConfig load_with_overrides(const CommonOpts& opt) {
    ExperimentConfig cfg = load_config(opt.config_path);
    if (opt.seed) cfg.seeds = {*opt.seed};
    if (opt.out) cfg.out_dir = *opt.out;
    if (opt.method) {
        auto m = parse_method(*opt.method);
        if (!m) throw ConfigError("unknown method '" + *opt.method + "'");
        cfg.methods = {*m};
    }
    if (opt.alpha) cfg.alphas = {*opt.alpha};
    if (opt.es) cfg.es_enabled = true;
    cfg.validate();
    return cfg;
}

int cmd_partition(const CommonOpts& opt) {
    ExperimentConfig cfg = load_with_overrides(opt);
    fs::create_directories(cfg.out_dir);
    for (double alpha : cfg.alphas) {
        for (uint64_t seed : cfg.seeds) {
            LabeledDataset ds = build_dataset(cfg.dataset, seed);
            PartitionPlan plan =
                dirichlet_partition(ds.labels, ds.class_count, alpha, cfg.clients, seed);
            json j = {{"alpha", alpha},
                      {"seed", seed},
                      {"clients", plan.client_indices}};
            std::ostringstream name;
            name << "partition_a" << alpha << "_s" << seed << ".json";
            std::ofstream f(fs::path(cfg.out_dir) / name.str(), std::ios::binary);
            f << j.dump(2) << "\n";
            std::cout << "wrote " << (fs::path(cfg.out_dir) / name.str()).string() << "\n";
        }
    }
    return kExitOk;
}

int cmd_run(const CommonOpts& opt) {
    ExperimentConfig cfg = load_with_overrides(opt);
    fs::create_directories(cfg.out_dir);
    for (const RunCell& cell : expand_sweep(cfg)) {
        LabeledDataset ds = build_dataset(cfg.dataset, cell.seed);
        CellSummary s = execute_cell(cfg, cell, ds);
        std::cout << s.cell << ": rounds=" << s.rounds_executed
                  << " mean_final_acc=" << s.mean_final_accuracy_uniform
                  << " bytes_up=" << s.total_bytes_up << "\n";
    }
    write_sweep_csv(cfg.out_dir);
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "summary.csv").string() << "\n";
    return kExitOk;
}

int cmd_diagnose(uint64_t seed, const std::string& out_dir) {
    fs::create_directories(out_dir);
    auto records = run_diagnostics(seed);
    fs::path path = fs::path(out_dir) / "diagnostics.jsonl";
    write_diagnostics(records, path);
    bool all_pass = true;
    for (const auto& r : records) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " value=" << r.value
                  << " threshold=" << r.threshold << "\n";
        all_pass = all_pass && r.pass;
    }
    std::cout << "wrote " << path.string() << "\n";
    return all_pass ? kExitOk : kExitRuntime;
}

int cmd_report(const std::string& out_dir) {
    write_sweep_csv(out_dir);
    std::cout << "wrote " << (fs::path(out_dir) / "summary.csv").string() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"FedSPU federated-learning simulator"};
    app.require_subcommand(1);

    CommonOpts opt;
    uint64_t diag_seed = 1;
    std::string diag_out = "out";
    std::string report_dir;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", opt.config_path, "experiment config (JSON)");
        if (config_required) c->required();
        sub->add_option("--seed", opt.seed, "override master seed");
        sub->add_option("--out", opt.out, "override output directory");
        sub->add_option("--method", opt.method, "override method");
        sub->add_option("--alpha", opt.alpha, "override Dirichlet alpha");
        sub->add_flag("--es", opt.es, "enable early stopping");
    };

    auto* partition = app.add_subcommand("partition", "write Dirichlet partition plans");
    add_common(partition, true);
    auto* run = app.add_subcommand("run", "execute the configured sweep");
    add_common(run, true);
    auto* diagnose = app.add_subcommand("diagnose", "run the theory/cost diagnostics suite");
    diagnose->add_option("--seed", diag_seed, "diagnostics seed");
    diagnose->add_option("--out", diag_out, "output directory");
    auto* report = app.add_subcommand("report", "summarize run outputs into CSV");
    report->add_option("--out", report_dir, "sweep output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (partition->parsed()) return cmd_partition(opt);
        if (run->parsed()) return cmd_run(opt);
        if (diagnose->parsed()) return cmd_diagnose(diag_seed, diag_out);
        if (report->parsed()) return cmd_report(report_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
