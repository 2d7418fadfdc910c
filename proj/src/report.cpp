#include "fedspu/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

using nlohmann::json;
namespace fs = std::filesystem;

namespace fedspu {

namespace {

json round_record_json(const RoundRecord& r) {
    json clients = json::array();
    for (const auto& c : r.clients) {
        clients.push_back({{"id", c.id},
                           {"train_loss", c.train_loss},
                           {"test_loss", c.test_loss},
                           {"test_acc", c.test_accuracy},
                           {"es_loss", c.es_loss},
                           {"stopped", c.stopped},
                           {"bytes_up", c.bytes_up},
                           {"bytes_down", c.bytes_down},
                           {"flops_fwd", c.flops_forward},
                           {"flops_bwd", c.flops_backward}});
    }
    return {{"round", r.round},
            {"clients", clients},
            {"stopped_ids", r.stopped_ids},
            {"mean_test_acc", r.mean_test_accuracy},
            {"active_remaining", r.active_remaining}};
}

} // namespace

CellSummary execute_cell(const ExperimentConfig& cfg, const RunCell& cell,
                         const LabeledDataset& dataset) {
    PartitionPlan plan =
        dirichlet_partition(dataset.labels, dataset.class_count, cell.alpha, cfg.clients,
                            cell.seed);
    FederationConfig fc = make_federation_config(cfg, cell);
    FederationResult result = run_federation(fc, dataset, plan);
    FinalEvaluation ev = evaluate_final(result, dataset, cell.method);

    CellSummary s;
    s.cell = cell.name();
    s.method = method_name(cell.method);
    s.alpha = cell.alpha;
    s.seed = cell.seed;
    s.rounds_executed = result.rounds_executed;
    s.early_terminated = result.early_terminated;
    s.mean_final_accuracy_uniform = ev.mean_accuracy_uniform;
    s.mean_final_accuracy_weighted = ev.mean_accuracy_weighted;
    for (const auto& r : result.history)
        for (const auto& c : r.clients) {
            s.total_bytes_up += c.bytes_up;
            s.total_bytes_down += c.bytes_down;
            s.total_flops_forward += c.flops_forward;
            s.total_flops_backward += c.flops_backward;
        }

    fs::path dir = fs::path(cfg.out_dir) / s.cell;
    fs::create_directories(dir / "models");

    std::ofstream metrics(dir / "metrics.jsonl", std::ios::binary);
    if (!metrics) throw std::runtime_error("cannot write " + (dir / "metrics.jsonl").string());
    for (const auto& r : result.history) metrics << round_record_json(r).dump() << "\n";
    metrics.close();

    json summary = {{"cell", s.cell},
                    {"method", s.method},
                    {"alpha", s.alpha},
                    {"seed", s.seed},
                    {"rounds_executed", s.rounds_executed},
                    {"early_terminated", s.early_terminated},
                    {"mean_final_acc_uniform", s.mean_final_accuracy_uniform},
                    {"mean_final_acc_weighted", s.mean_final_accuracy_weighted},
                    {"total_bytes_up", s.total_bytes_up},
                    {"total_bytes_down", s.total_bytes_down},
                    {"total_flops_fwd", s.total_flops_forward},
                    {"total_flops_bwd", s.total_flops_backward}};
    std::ofstream sf(dir / "summary.json", std::ios::binary);
    sf << summary.dump(2) << "\n";
    sf.close();

    // final local models, full masks, wire format
    NeuronMask full = full_neuron_mask(fc.arch);
    for (const ClientState& c : result.clients) {
        PayloadMeta meta{c.id, static_cast<uint32_t>(result.rounds_executed),
                         static_cast<uint32_t>(c.train_indices.size()), c.status};
        auto bytes = encode_payload(c.local, full, meta);
        std::ofstream mf(dir / "models" / ("client_" + std::to_string(c.id) + ".fspu"),
                         std::ios::binary);
        mf.write(reinterpret_cast<const char*>(bytes.data()),
                 static_cast<std::streamsize>(bytes.size()));
    }
    return s;
}

void write_sweep_csv(const fs::path& out_dir) {
    std::vector<fs::path> summaries;
    for (const auto& entry : fs::directory_iterator(out_dir))
        if (entry.is_directory() && fs::exists(entry.path() / "summary.json"))
            summaries.push_back(entry.path() / "summary.json");
    std::sort(summaries.begin(), summaries.end());

    std::ofstream csv(out_dir / "summary.csv", std::ios::binary);
    csv << "cell,method,alpha,seed,rounds_executed,early_terminated,"
           "mean_final_acc_uniform,mean_final_acc_weighted,"
           "total_bytes_up,total_bytes_down,total_flops_fwd,total_flops_bwd\n";
    for (const auto& p : summaries) {
        std::ifstream f(p);
        json s = json::parse(f);
        csv << s["cell"].get<std::string>() << "," << s["method"].get<std::string>() << ","
            << s["alpha"].get<double>() << "," << s["seed"].get<uint64_t>() << ","
            << s["rounds_executed"].get<int>() << "," << (s["early_terminated"].get<bool>() ? 1 : 0)
            << "," << s["mean_final_acc_uniform"].get<double>() << ","
            << s["mean_final_acc_weighted"].get<double>() << ","
            << s["total_bytes_up"].get<uint64_t>() << "," << s["total_bytes_down"].get<uint64_t>()
            << "," << s["total_flops_fwd"].get<int64_t>() << ","
            << s["total_flops_bwd"].get<int64_t>() << "\n";
    }
}

std::vector<DiagnosticRecord> run_diagnostics(uint64_t seed) {
    std::vector<DiagnosticRecord> out;
    Architecture arch{{16, 40, 40, 4}};
    LabeledDataset ds = gen_synthetic(4, 16, 40, 3.0, seed);

    // gradient identity: <grad, masked grad> == ||masked grad||^2
    {
        double max_res = 0.0;
        for (int t = 0; t < 200; ++t) {
            auto rng = RngStream::derive(seed, 0xd1a60001ULL, static_cast<uint64_t>(t));
            Model m = init_model(arch, rng.next_u64());
            std::vector<int> idx;
            for (int i = 0; i < 8; ++i) idx.push_back(static_cast<int>(rng.next_below(ds.size())));
            Batch b = ds.make_batch(idx);
            double p = 0.2 + 0.8 * rng.next_double();
            NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
            max_res = std::max(max_res, check_lemma2(m, b, derive_param_mask(nm, arch)));
        }
        out.push_back({"masked_gradient_inner_product_identity", max_res, 1e-12,
                       max_res <= 1e-12});
    }

    // masked gradient vs central finite differences
    {
        double max_err = 0.0;
        for (int t = 0; t < 20; ++t) {
            auto rng = RngStream::derive(seed, 0xd1a60002ULL, static_cast<uint64_t>(t));
            Model m = init_model(arch, rng.next_u64());
            std::vector<int> idx;
            for (int i = 0; i < 5; ++i) idx.push_back(static_cast<int>(rng.next_below(ds.size())));
            Batch b = ds.make_batch(idx);
            double p = 0.3 + 0.7 * rng.next_double();
            NeuronMask nm = sample_neuron_mask(arch, p, MaskStrategy::random, std::nullopt, rng);
            max_err = std::max(max_err, finite_diff_check(m, b, derive_param_mask(nm, arch), 1e-5,
                                                          100, rng.next_u64()));
        }
        out.push_back({"finite_difference_gradient_check", max_err, 1e-4, max_err < 1e-4});
    }

    // masked-gradient energy ratio vs the activity-rate prediction
    {
        auto rng = RngStream::derive(seed, 0xd1a60003ULL);
        Model m = init_model(arch, rng.next_u64());
        std::vector<int> idx;
        for (int i = 0; i < 16; ++i) idx.push_back(static_cast<int>(rng.next_below(ds.size())));
        Batch b = ds.make_batch(idx);
        for (double p : {0.2, 0.5, 0.8}) {
            Lemma1Result r = mc_check_lemma1(m, b, p, 20000, seed);
            double rel = std::abs(r.mc_ratio_inter_hidden - p * p) / (p * p);
            out.push_back({"masked_energy_ratio_inter_hidden_p" + std::to_string(p), rel, 0.02,
                           rel <= 0.02});
            double rel_full =
                std::abs(r.mc_ratio_full - r.closed_form_full) / r.closed_form_full;
            out.push_back({"masked_energy_ratio_full_closed_form_p" + std::to_string(p), rel_full,
                           0.02, rel_full <= 0.02});
        }
    }

    // convergence constants from a short run, plus the bound evaluation
    {
        PartitionPlan plan = dirichlet_partition(ds.labels, ds.class_count, 1.0, 4, seed);
        FederationConfig fc;
        fc.method = Method::fedspu;
        fc.rounds = 12;
        fc.clients_per_round = 4;
        fc.local_epochs = 1;
        fc.batch_size = 16;
        fc.eta = 0.05;
        fc.lambda = 0.7;
        fc.master_seed = seed;
        fc.arch = arch;
        fc.client_p = {0.5, 0.5, 0.5, 0.5};
        fc.validate();

        // mirror the federation loop, probing (w, w_hat) at each dispatch
        std::vector<ConstantsSample> samples;
        Model global = init_model(arch, seed);
        std::vector<ClientState> clients;
        for (int k = 0; k < 4; ++k) {
            ClientState st;
            st.id = static_cast<uint32_t>(k);
            st.local = global;
            st.p = 0.5;
            auto [tr, va] = train_test_split(plan.client_indices[k], ds.labels, 0.7,
                                             mix64(seed) ^ static_cast<uint64_t>(k));
            st.train_indices = tr;
            st.val_indices = va;
            clients.push_back(std::move(st));
        }
        for (int round = 1; round <= fc.rounds; ++round) {
            std::vector<uint32_t> ids{0, 1, 2, 3};
            auto dispatches = dispatch_round(global, fc.method, round, seed, ids, clients);
            std::vector<ActivePayload> ups;
            for (uint32_t id : ids) {
                ClientState& c = clients[id];
                Batch full_train = ds.make_batch(c.train_indices);
                Model merged = merge_active(c.local, dispatches.at(id).payload);
                auto [l1, g_local] = loss_grad(c.local, full_train);
                auto [l2, g_merged] = loss_grad(merged, full_train);
                (void)l1;
                (void)l2;
                ConstantsSample cs;
                cs.grad_norm2_local = grad_norm2(g_local);
                cs.grad_norm2_merged = grad_norm2(g_merged);
                cs.divergence2 = model_dist2(merged, c.local);
                Gradient diff = g_local;
                for (size_t l = 0; l < diff.layers.size(); ++l) {
                    for (size_t i = 0; i < diff.layers[l].weights.size(); ++i)
                        diff.layers[l].weights[i] -= g_merged.layers[l].weights[i];
                    for (size_t i = 0; i < diff.layers[l].bias.size(); ++i)
                        diff.layers[l].bias[i] -= g_merged.layers[l].bias[i];
                }
                cs.lipschitz_ratio = cs.divergence2 > 0.0
                                         ? std::sqrt(grad_norm2(diff) / cs.divergence2)
                                         : 0.0;
                samples.push_back(cs);

                ClientRoundConfig ccfg;
                ccfg.epochs = 1;
                ccfg.eta = fc.eta;
                ccfg.batch_size = fc.batch_size;
                ccfg.lambda = fc.lambda;
                ccfg.mode = TrainMode::full_model_frozen;
                RoundMetrics m;
                ups.push_back(client_round(c, dispatches.at(id).payload, ds, ccfg,
                                           RngStream::derive(seed ^ 0x7472616eULL, id,
                                                             static_cast<uint64_t>(round)),
                                           m));
            }
            global = aggregate_payloads(global, ups);
        }

        TheoryConstants tc = estimate_constants(samples, 0.5, fc.eta);
        out.push_back({"assumption_Q_ratio_bound", tc.Q, 0.0, std::isfinite(tc.Q) && tc.Q > 0.0});
        out.push_back({"assumption_sigma2_divergence_bound", tc.sigma2, 0.0,
                       std::isfinite(tc.sigma2) && tc.sigma2 >= 0.0});
        out.push_back({"smoothness_L_lower_estimate", tc.L, 0.0,
                       std::isfinite(tc.L) && tc.L > 0.0});
        TheoremBound b = theorem1_bound(tc);
        out.push_back({"critical_point_bound_epsilon", b.epsilon.value_or(-1.0), 0.0,
                       b.epsilon.has_value() || !b.violated_condition.empty()});
        out.push_back({"learning_rate_threshold", b.eta_threshold.value_or(-1.0), 0.0,
                       b.eta_threshold.has_value() || !b.violated_condition.empty()});
    }

    // cost-model structure
    {
        Architecture big{{64, 256, 256, 10}};
        bool ok = true;
        double prev_reduction = 1.0;
        for (double p : {0.8, 0.6, 0.4, 0.2}) {
            CostReport spu = cost_model(big, p, Method::fedspu, 16);
            CostReport imp = cost_model(big, p, Method::hermes, 16);
            CostReport drop = cost_model(big, p, Method::random_dropout, 16);
            CostReport full = cost_model(big, 1.0, Method::fedspu, 16);
            if (!(spu.total_bytes < imp.total_bytes)) ok = false;
            double reduction = static_cast<double>(spu.total_bytes) / imp.total_bytes;
            if (!(reduction < prev_reduction)) ok = false;
            prev_reduction = reduction;
            if (spu.flops_forward != full.flops_forward) ok = false;
            if (!(drop.flops_forward < full.flops_forward)) ok = false;
            if (!(spu.flops_backward < full.flops_backward)) ok = false;
        }
        out.push_back({"cost_model_structure", ok ? 1.0 : 0.0, 1.0, ok});
    }

    return out;
}

void write_diagnostics(const std::vector<DiagnosticRecord>& records, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) {
        json j = {{"name", r.name}, {"value", r.value}, {"threshold", r.threshold},
                  {"pass", r.pass}};
        f << j.dump() << "\n";
    }
}

} // namespace fedspu
