#include "fedspu/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

using nlohmann::json;

namespace fedspu {

void ExperimentConfig::validate() const {
    try {
        arch.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("arch: ") + e.what());
    }
    if (methods.empty()) throw ConfigError("method: at least one required");
    if (rounds < 0) throw ConfigError("rounds: must be >= 0");
    if (clients < 2) throw ConfigError("clients: must be >= 2");
    if (clients_per_round < 1) throw ConfigError("clients_per_round: must be >= 1");
    if (local_epochs < 1) throw ConfigError("local_epochs: must be >= 1");
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw ConfigError("eta: must be finite and >= 0");
    if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (!(lambda > 0.0 && lambda < 1.0)) throw ConfigError("lambda: must be in (0,1)");
    if (alphas.empty()) throw ConfigError("alpha: at least one required");
    for (double a : alphas)
        if (!(a > 0.0)) throw ConfigError("alpha: must be > 0");
    if (seeds.empty()) throw ConfigError("seed: at least one required");
    if (p_clusters.empty()) throw ConfigError("p_clusters: at least one required");
    double frac = 0.0;
    for (const auto& pc : p_clusters) {
        if (!(pc.ratio > 0.0 && pc.ratio <= 1.0)) throw ConfigError("p_clusters: ratio must be in (0,1]");
        if (!(pc.fraction > 0.0)) throw ConfigError("p_clusters: fraction must be > 0");
        frac += pc.fraction;
    }
    if (std::abs(frac - 1.0) > 1e-9) throw ConfigError("p_clusters: fractions must sum to 1");
    if (dataset.kind == DatasetSpec::Kind::synthetic) {
        if (dataset.classes < 2 || dataset.dim < 2 || dataset.per_class < 10)
            throw ConfigError("dataset: synthetic needs classes>=2, dim>=2, per_class>=10");
        if (dataset.classes != arch.output_width())
            throw ConfigError("dataset: class count must match the architecture's output width");
        if (dataset.dim != arch.input_width())
            throw ConfigError("dataset: dim must match the architecture's input width");
    } else {
        if (dataset.images_path.empty() || dataset.labels_path.empty())
            throw ConfigError("dataset: idx needs images and labels paths");
    }
    if (out_dir.empty()) throw ConfigError("out_dir: required");
}

namespace {

template <typename T>
std::vector<T> scalar_or_list(const json& v, const char* field) {
    std::vector<T> out;
    if (v.is_array()) {
        for (const auto& e : v) out.push_back(e.get<T>());
    } else {
        out.push_back(v.get<T>());
    }
    if (out.empty()) throw ConfigError(std::string(field) + ": empty list");
    return out;
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& ctx) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown key '" + it.key() + "' in " + ctx);
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");

    reject_unknown(j,
                   {"method", "rounds", "clients", "clients_per_round", "local_epochs", "eta",
                    "batch_size", "lambda", "alpha", "p_clusters", "es_enabled", "seed", "arch",
                    "dataset", "out_dir"},
                   "config");

    ExperimentConfig cfg;
    try {
        if (j.contains("method")) {
            cfg.methods.clear();
            for (const std::string& name : scalar_or_list<std::string>(j["method"], "method")) {
                auto m = parse_method(name);
                if (!m) throw ConfigError("method: unknown method '" + name + "'");
                cfg.methods.push_back(*m);
            }
        }
        if (j.contains("rounds")) cfg.rounds = j["rounds"].get<int>();
        if (j.contains("clients")) cfg.clients = j["clients"].get<int>();
        if (j.contains("clients_per_round")) cfg.clients_per_round = j["clients_per_round"].get<int>();
        if (j.contains("local_epochs")) cfg.local_epochs = j["local_epochs"].get<int>();
        if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
        if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
        if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
        if (j.contains("alpha")) cfg.alphas = scalar_or_list<double>(j["alpha"], "alpha");
        if (j.contains("seed")) cfg.seeds = scalar_or_list<uint64_t>(j["seed"], "seed");
        if (j.contains("es_enabled")) cfg.es_enabled = j["es_enabled"].get<bool>();
        if (j.contains("arch")) cfg.arch.layer_widths = j["arch"].get<std::vector<int>>();
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("p_clusters")) {
            cfg.p_clusters.clear();
            for (const auto& e : j["p_clusters"]) {
                reject_unknown(e, {"ratio", "fraction"}, "p_clusters entry");
                cfg.p_clusters.push_back({e.at("ratio").get<double>(),
                                          e.at("fraction").get<double>()});
            }
        }
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            std::string type = d.at("type").get<std::string>();
            if (type == "synthetic") {
                reject_unknown(d, {"type", "classes", "dim", "per_class", "separation"},
                               "dataset");
                cfg.dataset.kind = DatasetSpec::Kind::synthetic;
                if (d.contains("classes")) cfg.dataset.classes = d["classes"].get<int>();
                if (d.contains("dim")) cfg.dataset.dim = d["dim"].get<int>();
                if (d.contains("per_class")) cfg.dataset.per_class = d["per_class"].get<int>();
                if (d.contains("separation")) cfg.dataset.separation = d["separation"].get<double>();
            } else if (type == "idx") {
                reject_unknown(d, {"type", "images", "labels"}, "dataset");
                cfg.dataset.kind = DatasetSpec::Kind::idx;
                cfg.dataset.images_path = d.at("images").get<std::string>();
                cfg.dataset.labels_path = d.at("labels").get<std::string>();
            } else {
                throw ConfigError("dataset: type must be 'synthetic' or 'idx'");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

std::string RunCell::name() const {
    std::ostringstream ss;
    ss << method_name(method) << "_a" << alpha << "_s" << seed;
    return ss.str();
}

std::vector<RunCell> expand_sweep(const ExperimentConfig& cfg) {
    std::vector<RunCell> cells;
    for (Method m : cfg.methods)
        for (double a : cfg.alphas)
            for (uint64_t s : cfg.seeds) cells.push_back({m, a, s});
    return cells;
}

std::vector<double> cluster_ratios(const ExperimentConfig& cfg) {
    std::vector<double> p(cfg.clients);
    int assigned = 0;
    double cum = 0.0;
    for (size_t c = 0; c < cfg.p_clusters.size(); ++c) {
        cum += cfg.p_clusters[c].fraction;
        int upto = (c + 1 == cfg.p_clusters.size())
                       ? cfg.clients
                       : static_cast<int>(std::floor(cum * cfg.clients + 0.5));
        for (; assigned < upto; ++assigned) p[assigned] = cfg.p_clusters[c].ratio;
    }
    return p;
}

FederationConfig make_federation_config(const ExperimentConfig& cfg, const RunCell& cell) {
    FederationConfig fc;
    fc.method = cell.method;
    fc.rounds = cfg.rounds;
    fc.clients_per_round = cfg.clients_per_round;
    fc.local_epochs = cfg.local_epochs;
    fc.batch_size = cfg.batch_size;
    fc.eta = cfg.eta;
    fc.lambda = cfg.lambda;
    fc.es_enabled = cfg.es_enabled;
    fc.master_seed = cell.seed;
    fc.arch = cfg.arch;
    fc.client_p = cluster_ratios(cfg);
    return fc;
}

LabeledDataset build_dataset(const DatasetSpec& spec, uint64_t seed) {
    if (spec.kind == DatasetSpec::Kind::synthetic)
        return gen_synthetic(spec.classes, spec.dim, spec.per_class, spec.separation, seed);
    return load_idx(spec.images_path, spec.labels_path);
}

} // namespace fedspu
