#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "fedspu/rng.hpp"

using namespace fedspu;

TEST_CASE("identical keys give identical streams") {
    auto a = RngStream::derive(42, 7, 3);
    auto b = RngStream::derive(42, 7, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different coordinates give different streams") {
    auto a = RngStream::derive(42, 7, 3);
    auto b = RngStream::derive(42, 7, 4);
    auto c = RngStream::derive(42, 8, 3);
    CHECK(a.next_u64() != b.next_u64());
    auto a2 = RngStream::derive(42, 7, 3);
    CHECK(a2.next_u64() != c.next_u64());
}

TEST_CASE("next_below stays in range") {
    auto rng = RngStream::derive(1, 2);
    for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(17) < 17);
    CHECK_THROWS_AS(rng.next_below(0), std::invalid_argument);
}

TEST_CASE("next_double in [0,1) with sane mean") {
    auto rng = RngStream::derive(3, 0);
    double sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = rng.next_double();
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
        sum += x;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.02);
}

TEST_CASE("normal moments") {
    auto rng = RngStream::derive(4, 0);
    double sum = 0.0, sum2 = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        double x = rng.next_normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("gamma mean matches shape") {
    for (double shape : {0.1, 0.5, 1.0, 3.0}) {
        auto rng = RngStream::derive(5, static_cast<uint64_t>(shape * 100));
        double sum = 0.0;
        const int n = 50000;
        for (int i = 0; i < n; ++i) {
            double x = rng.next_gamma(shape);
            CHECK(x > 0.0);
            sum += x;
        }
        CHECK(sum / n == doctest::Approx(shape).epsilon(0.05));
    }
}

TEST_CASE("sample_without_replacement: distinct, sorted, in range") {
    auto rng = RngStream::derive(6, 0);
    for (int t = 0; t < 50; ++t) {
        auto s = rng.sample_without_replacement(30, 10);
        CHECK(s.size() == 10);
        std::set<int> uniq(s.begin(), s.end());
        CHECK(uniq.size() == 10);
        CHECK(std::is_sorted(s.begin(), s.end()));
        for (int v : s) CHECK((v >= 0 && v < 30));
    }
    CHECK_THROWS_AS(rng.sample_without_replacement(3, 5), std::invalid_argument);
}
