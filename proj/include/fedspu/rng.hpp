#pragma once

#include <cstdint>
#include <vector>

namespace fedspu {

// Counter-based deterministic stream: output i is a pure function of
// (key, i), so streams derived from the same coordinates are identical
// regardless of worker count or call interleaving across streams.
class RngStream {
public:
    explicit RngStream(uint64_t key) : key_(key) {}

    // Derive a substream from coordinate tuple (a, b) under `master`.
    static RngStream derive(uint64_t master, uint64_t a, uint64_t b = 0);

    uint64_t next_u64();

    // Uniform in [0, n), n >= 1.
    uint64_t next_below(uint64_t n);

    // Uniform in [0, 1) with 53 bits.
    double next_double();

    // Standard normal (Box-Muller, two draws per call).
    double next_normal();

    // Gamma(shape, 1), shape > 0. Marsaglia-Tsang with the alpha<1 boost.
    double next_gamma(double shape);

    // k distinct values from {0,...,n-1}, ascending order.
    std::vector<int> sample_without_replacement(int n, int k);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = next_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t key_;
    uint64_t counter_ = 0;
};

uint64_t mix64(uint64_t x);

} // namespace fedspu
