#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedspu/nn.hpp"
#include "fedspu/rng.hpp"

namespace fedspu {

struct LabeledDataset {
    std::vector<double> features; // n x dim, row-major
    std::vector<int> labels;
    int dim = 0;
    int class_count = 0;

    int size() const { return static_cast<int>(labels.size()); }
    Batch make_batch(const std::vector<int>& indices) const;
};

struct PartitionPlan {
    std::vector<std::vector<int>> client_indices;
    double alpha = 1.0;
    uint64_t seed = 0;
};

// Gaussian blobs: class c is isotropic unit-variance around a random unit
// direction scaled by `separation`.
LabeledDataset gen_synthetic(int classes, int dim, int per_class, double separation,
                             uint64_t seed);

// Per class, proportions over clients drawn from Dirichlet(alpha), samples
// assigned multinomially. Re-draws until every client holds >= 2*C samples.
PartitionPlan dirichlet_partition(const std::vector<int>& labels, int class_count, double alpha,
                                  int n_clients, uint64_t seed, int max_retries = 100);

// Stratified split of one client's index list: round(lambda*n) train, rest
// validation.
std::pair<std::vector<int>, std::vector<int>> train_test_split(const std::vector<int>& indices,
                                                               const std::vector<int>& labels,
                                                               double lambda, uint64_t seed);

// IDX (MNIST-style ubyte) loader: features scaled to [0,1].
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

} // namespace fedspu
