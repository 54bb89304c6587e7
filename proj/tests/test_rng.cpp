#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dmlme/gaussian.hpp"
#include "dmlme/rng.hpp"

#include <cmath>
#include <set>

using namespace dmlme;

TEST_CASE("same seed reproduces the stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("children depend on the construction seed, not the draw position") {
    Rng a(7);
    a.next_u64();
    a.next_u64();
    Rng b(7);
    CHECK(a.child(3).next_u64() == b.child(3).next_u64());
    CHECK(a.child(3).next_u64() != b.child(4).next_u64());
}

TEST_CASE("uniform01 stays strictly inside (0, 1)") {
    Rng rng(1);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("uniform_below covers the range") {
    Rng rng(5);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t v = rng.uniform_below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("normal deviates have roughly standard moments") {
    Rng rng(99);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);      // ~4.5 sigma band
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("normal quantile matches reference values") {
    CHECK(normal_quantile(0.5) == 0.0);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-12));
    CHECK(normal_quantile(0.995) == doctest::Approx(2.5758293035489004).epsilon(1e-12));
    CHECK(normal_quantile(0.84) == doctest::Approx(0.994457883209753).epsilon(1e-12));
    CHECK(normal_quantile(1e-9) == doctest::Approx(-5.9978070150076865).epsilon(1e-10));
    CHECK_THROWS_AS(normal_quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(normal_quantile(1.0), std::invalid_argument);
}
