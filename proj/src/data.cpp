#include "fedspu/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace fedspu {

Batch LabeledDataset::make_batch(const std::vector<int>& indices) const {
    Batch b;
    b.width = dim;
    b.inputs.reserve(indices.size() * dim);
    b.labels.reserve(indices.size());
    for (int i : indices) {
        const double* row = &features[static_cast<size_t>(i) * dim];
        b.inputs.insert(b.inputs.end(), row, row + dim);
        b.labels.push_back(labels[i]);
    }
    return b;
}

LabeledDataset gen_synthetic(int classes, int dim, int per_class, double separation,
                             uint64_t seed) {
    if (classes < 2 || dim < 2 || per_class < 10)
        throw std::invalid_argument("gen_synthetic: need C>=2, d>=2, n_c>=10");
    auto rng = RngStream::derive(seed, 0x73796e74ULL);
    LabeledDataset ds;
    ds.dim = dim;
    ds.class_count = classes;

    std::vector<std::vector<double>> means(classes, std::vector<double>(dim));
    for (auto& mu : means) {
        double norm = 0.0;
        for (double& v : mu) {
            v = rng.next_normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : mu) v = v / norm * separation;
    }

    for (int c = 0; c < classes; ++c) {
        for (int s = 0; s < per_class; ++s) {
            for (int j = 0; j < dim; ++j) ds.features.push_back(means[c][j] + rng.next_normal());
            ds.labels.push_back(c);
        }
    }
    return ds;
}

PartitionPlan dirichlet_partition(const std::vector<int>& labels, int class_count, double alpha,
                                  int n_clients, uint64_t seed, int max_retries) {
    if (n_clients < 2) throw std::invalid_argument("dirichlet_partition: need N >= 2");
    if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet_partition: alpha must be > 0");

    std::vector<std::vector<int>> by_class(class_count);
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) by_class[labels[i]].push_back(i);

    const int min_per_client = 2 * class_count;
    auto rng = RngStream::derive(seed, 0x64697269ULL);

    for (int attempt = 0; attempt < max_retries; ++attempt) {
        PartitionPlan plan;
        plan.alpha = alpha;
        plan.seed = seed;
        plan.client_indices.assign(n_clients, {});
        for (int c = 0; c < class_count; ++c) {
            std::vector<double> q(n_clients);
            double sum = 0.0;
            for (double& v : q) {
                v = rng.next_gamma(alpha);
                sum += v;
            }
            for (double& v : q) v /= sum;
            // multinomial assignment via cumulative proportions
            std::vector<double> cum(n_clients);
            std::partial_sum(q.begin(), q.end(), cum.begin());
            for (int idx : by_class[c]) {
                double u = rng.next_double();
                int k = static_cast<int>(std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
                if (k >= n_clients) k = n_clients - 1;
                plan.client_indices[k].push_back(idx);
            }
        }
        bool ok = true;
        for (const auto& ci : plan.client_indices)
            if (static_cast<int>(ci.size()) < min_per_client) ok = false;
        if (ok) {
            for (auto& ci : plan.client_indices) std::sort(ci.begin(), ci.end());
            return plan;
        }
    }
    throw std::runtime_error("dirichlet_partition: retry budget exhausted (alpha too small for N)");
}

std::pair<std::vector<int>, std::vector<int>> train_test_split(const std::vector<int>& indices,
                                                               const std::vector<int>& labels,
                                                               double lambda, uint64_t seed) {
    if (!(lambda > 0.0 && lambda < 1.0))
        throw std::invalid_argument("train_test_split: lambda must be in (0,1)");
    if (indices.size() < 2) throw std::invalid_argument("train_test_split: entry too small");

    const int n = static_cast<int>(indices.size());
    const int n_train = static_cast<int>(std::floor(lambda * n + 0.5));

    // group by class, split each class at the lambda fraction
    std::vector<std::vector<int>> by_class;
    for (int idx : indices) {
        int y = labels[idx];
        if (y >= static_cast<int>(by_class.size())) by_class.resize(y + 1);
        by_class[y].push_back(idx);
    }
    auto rng = RngStream::derive(seed, 0x73706c74ULL);
    std::vector<int> train, val;
    for (auto& group : by_class) {
        if (group.empty()) continue;
        rng.shuffle(group);
        int k = static_cast<int>(std::floor(lambda * group.size() + 0.5));
        train.insert(train.end(), group.begin(), group.begin() + k);
        val.insert(val.end(), group.begin() + k, group.end());
    }
    // per-class rounding can drift the overall count; rebalance to hit it
    while (static_cast<int>(train.size()) > n_train && !train.empty()) {
        val.push_back(train.back());
        train.pop_back();
    }
    while (static_cast<int>(train.size()) < n_train && !val.empty()) {
        train.push_back(val.back());
        val.pop_back();
    }
    if (train.empty() || val.empty())
        throw std::invalid_argument("train_test_split: split left an empty shard");
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
    return {train, val};
}

namespace {

uint32_t read_be_u32(std::ifstream& f, const std::string& path) {
    uint8_t b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error("truncated IDX file: " + path);
    return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
           (static_cast<uint32_t>(b[2]) << 8) | b[3];
}

} // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open " + images_path);
    if (read_be_u32(img, images_path) != 0x00000803u)
        throw std::runtime_error("bad IDX image magic in " + images_path);
    uint32_t n = read_be_u32(img, images_path);
    uint32_t rows = read_be_u32(img, images_path);
    uint32_t cols = read_be_u32(img, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw std::runtime_error("cannot open " + labels_path);
    if (read_be_u32(lab, labels_path) != 0x00000801u)
        throw std::runtime_error("bad IDX label magic in " + labels_path);
    uint32_t n_lab = read_be_u32(lab, labels_path);
    if (n != n_lab) throw std::runtime_error("IDX image/label count mismatch");

    LabeledDataset ds;
    ds.dim = static_cast<int>(rows * cols);
    std::vector<uint8_t> buf(ds.dim);
    int max_label = 0;
    for (uint32_t i = 0; i < n; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), ds.dim))
            throw std::runtime_error("truncated IDX image data in " + images_path);
        for (uint8_t v : buf) ds.features.push_back(v / 255.0);
        char y;
        if (!lab.get(y)) throw std::runtime_error("truncated IDX label data in " + labels_path);
        ds.labels.push_back(static_cast<uint8_t>(y));
        max_label = std::max(max_label, static_cast<int>(static_cast<uint8_t>(y)));
    }
    ds.class_count = max_label + 1;
    return ds;
}

} // namespace fedspu
