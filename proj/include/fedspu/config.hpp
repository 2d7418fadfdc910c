#pragma once

#include <string>
#include <vector>

#include "fedspu/server.hpp"

namespace fedspu {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PCluster {
    double ratio = 1.0;
    double fraction = 1.0;
};

struct DatasetSpec {
    enum class Kind { synthetic, idx } kind = Kind::synthetic;
    // synthetic
    int classes = 8;
    int dim = 32;
    int per_class = 250;
    double separation = 3.0;
    // idx
    std::string images_path;
    std::string labels_path;
};

// One sweep config; method/alpha/seed may be lists and expand to a
// Cartesian product of run cells.
struct ExperimentConfig {
    std::vector<Method> methods{Method::fedspu};
    int rounds = 500;
    int clients = 100;
    int clients_per_round = 10;
    int local_epochs = 5;
    double eta = 0.05;
    int batch_size = 16;
    double lambda = 0.7;
    std::vector<double> alphas{0.5};
    std::vector<PCluster> p_clusters{{0.2, 0.2}, {0.4, 0.2}, {0.6, 0.2}, {0.8, 0.2}, {1.0, 0.2}};
    bool es_enabled = false;
    std::vector<uint64_t> seeds{1};
    Architecture arch{{32, 64, 64, 8}};
    DatasetSpec dataset;
    std::string out_dir = "out";

    void validate() const;
};

struct RunCell {
    Method method;
    double alpha;
    uint64_t seed;
    std::string name() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

std::vector<RunCell> expand_sweep(const ExperimentConfig& cfg);

// Per-client p_k from the cluster spec: clients assigned to clusters in
// order, fractions scaled by the client count.
std::vector<double> cluster_ratios(const ExperimentConfig& cfg);

FederationConfig make_federation_config(const ExperimentConfig& cfg, const RunCell& cell);

LabeledDataset build_dataset(const DatasetSpec& spec, uint64_t seed);

} // namespace fedspu
