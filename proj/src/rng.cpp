#include "fedspu/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedspu {

uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

RngStream RngStream::derive(uint64_t master, uint64_t a, uint64_t b) {
    uint64_t k = mix64(master);
    k = mix64(k ^ (a + 0x9E3779B97F4A7C15ULL));
    k = mix64(k ^ (b + 0xD1B54A32D192ED03ULL));
    return RngStream(k);
}

uint64_t RngStream::next_u64() {
    return mix64(key_ + counter_++ * 0x9E3779B97F4A7C15ULL);
}

uint64_t RngStream::next_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be >= 1");
    // rejection sampling on the top multiple of n
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double RngStream::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::next_normal() {
    double u1, u2;
    do {
        u1 = next_double();
    } while (u1 <= 0.0);
    u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double RngStream::next_gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("next_gamma: shape must be > 0");
    if (shape < 1.0) {
        double u;
        do {
            u = next_double();
        } while (u <= 0.0);
        return next_gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = next_normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        double u = next_double();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

std::vector<int> RngStream::sample_without_replacement(int n, int k) {
    if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    // partial Fisher-Yates
    for (int i = 0; i < k; ++i) {
        int j = i + static_cast<int>(next_below(static_cast<uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

} // namespace fedspu
