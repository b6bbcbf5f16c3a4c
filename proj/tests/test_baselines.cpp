#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "kts/baselines.hpp"
#include "kts/simulate.hpp"
#include "oracles.hpp"

using kts::Index;
using kts::Matrix;

namespace {

kts::KernelConfig fixed(double sigma) {
    kts::KernelConfig config;
    config.bandwidth = kts::FixedBandwidth{sigma};
    return config;
}

} // namespace

TEST_CASE("mmd_u matches the naive unbiased estimator") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Index m = 10 + static_cast<Index>(seed % 7) * 5;
        const Index n = 12 + static_cast<Index>(seed % 5) * 6;
        const Index d = 1 + static_cast<Index>(seed % 4);
        const Matrix x = reference::random_matrix(m, d, 100 + seed);
        const Matrix y = reference::random_matrix(n, d, 200 + seed);
        const double sigma = 0.5 + 0.1 * static_cast<double>(seed);
        const double fast = kts::mmd_u(x, y, fixed(sigma));
        const double naive = reference::mmd_u(x, y, sigma);
        REQUIRE_THAT(fast, Catch::Matchers::WithinAbs(naive, 1e-12) ||
                               Catch::Matchers::WithinRel(naive, 1e-12));
    }
}

TEST_CASE("mmd_u is symmetric in its arguments") {
    const Matrix x = reference::random_matrix(40, 3, 11);
    const Matrix y = reference::random_matrix(55, 3, 12);
    const double xy = kts::mmd_u(x, y, fixed(1.0));
    const double yx = kts::mmd_u(y, x, fixed(1.0));
    REQUIRE_THAT(xy, Catch::Matchers::WithinAbs(yx, 1e-12));
}

TEST_CASE("mmd_u exceeds the tiling width without changing value") {
    // 300 rows forces at least two 256-row tiles through the pair sum.
    const Matrix x = reference::random_matrix(300, 2, 21);
    const Matrix y = reference::random_matrix(280, 2, 22);
    const double fast = kts::mmd_u(x, y, fixed(2.0));
    const double naive = reference::mmd_u(x, y, 2.0);
    REQUIRE_THAT(fast, Catch::Matchers::WithinAbs(naive, 1e-12));
}

TEST_CASE("mmd_linear: identical constant samples give statistic 0 and no p-value") {
    Matrix x(8, 2);
    x.setConstant(0.5);
    const Matrix y = x;
    const kts::MmdResult result = kts::mmd_linear(x, y, fixed(1.0));
    REQUIRE(result.statistic == 0.0);
    REQUIRE_FALSE(result.p_value.has_value());
    REQUIRE(result.method == kts::MmdMethod::Linear);
}

TEST_CASE("mmd_linear: constant nonzero increments are degenerate") {
    Matrix x(8, 2);
    x.setConstant(0.0);
    Matrix y(8, 2);
    y.setConstant(1.0);
    REQUIRE_THROWS_MATCHES(kts::mmd_linear(x, y, fixed(1.0)), kts::Error,
                           Catch::Matchers::Predicate<kts::Error>([](const auto& e) {
                               return e.code() == kts::ErrorCode::DegenerateStatistic;
                           }));
}

TEST_CASE("mmd_linear matches a hand-rolled pair average") {
    const Matrix x = reference::random_matrix(20, 3, 31);
    const Matrix y = reference::random_matrix(20, 3, 32);
    const double sigma = 1.3;
    const kts::MmdResult result = kts::mmd_linear(x, y, fixed(sigma));

    double mean = 0.0;
    std::vector<double> hs;
    for (Index p = 0; p < 10; ++p) {
        const Index i = 2 * p, j = 2 * p + 1;
        const double h = reference::gaussian_pair(x, i, x, j, sigma) +
                         reference::gaussian_pair(y, i, y, j, sigma) -
                         reference::gaussian_pair(x, i, y, j, sigma) -
                         reference::gaussian_pair(x, j, y, i, sigma);
        hs.push_back(h);
        mean += h;
    }
    mean /= 10.0;
    REQUIRE_THAT(result.statistic, Catch::Matchers::WithinAbs(mean, 1e-13));

    double var = 0.0;
    for (const double h : hs) var += (h - mean) * (h - mean);
    var /= 9.0;
    const double z = mean / std::sqrt(var / 10.0);
    REQUIRE(result.p_value.has_value());
    REQUIRE_THAT(*result.p_value,
                 Catch::Matchers::WithinAbs(1.0 - kts::std_normal_cdf(z), 1e-12));
}

TEST_CASE("mmd_linear pair shuffling is seed-deterministic and changes the pairing") {
    const Matrix x = reference::random_matrix(64, 2, 41);
    const Matrix y = reference::random_matrix(64, 2, 42);
    const kts::MmdResult a = kts::mmd_linear(x, y, fixed(1.0), 7);
    const kts::MmdResult b = kts::mmd_linear(x, y, fixed(1.0), 7);
    const kts::MmdResult c = kts::mmd_linear(x, y, fixed(1.0), 8);
    REQUIRE(a.statistic == b.statistic);
    REQUIRE(a.statistic != c.statistic);
}

TEST_CASE("mmd_linear and mmd_block require balanced samples") {
    const Matrix x = reference::random_matrix(16, 2, 51);
    const Matrix y = reference::random_matrix(18, 2, 52);
    REQUIRE_THROWS_MATCHES(kts::mmd_linear(x, y, fixed(1.0)), kts::Error,
                           Catch::Matchers::Predicate<kts::Error>([](const auto& e) {
                               return e.code() == kts::ErrorCode::UnbalancedNotSupported;
                           }));
    REQUIRE_THROWS_MATCHES(kts::mmd_block(x, y, fixed(1.0)), kts::Error,
                           Catch::Matchers::Predicate<kts::Error>([](const auto& e) {
                               return e.code() == kts::ErrorCode::UnbalancedNotSupported;
                           }));
}

TEST_CASE("mmd_block standardizes per-block quadratic estimates") {
    const Index m = 24;
    const std::size_t block_size = 12; // exactly 2 blocks
    const Matrix x = reference::random_matrix(m, 3, 61);
    const Matrix y = reference::random_matrix(m, 3, 62);
    const double sigma = 0.9;
    const kts::MmdResult result = kts::mmd_block(x, y, fixed(sigma), block_size);

    std::vector<double> etas;
    for (std::size_t j = 0; j < 2; ++j) {
        const auto offset = static_cast<Index>(j * block_size);
        etas.push_back(reference::mmd_u(x.middleRows(offset, 12), y.middleRows(offset, 12),
                                        sigma));
    }
    const double mean = 0.5 * (etas[0] + etas[1]);
    double var = 0.0;
    for (const double eta : etas) var += (eta - mean) * (eta - mean);
    const double expected = std::sqrt(2.0) * mean / std::sqrt(var);
    REQUIRE_THAT(result.statistic, Catch::Matchers::WithinAbs(expected, 1e-12));
    REQUIRE(result.p_value.has_value());
    REQUIRE_THAT(*result.p_value,
                 Catch::Matchers::WithinAbs(1.0 - kts::std_normal_cdf(expected), 1e-12));
}

TEST_CASE("mmd_block defaults the block size to floor(sqrt(m))") {
    const Matrix x = reference::random_matrix(100, 2, 71);
    const Matrix y = reference::random_matrix(100, 2, 72);
    const kts::MmdResult by_default = kts::mmd_block(x, y, fixed(1.0));
    const kts::MmdResult explicit_size = kts::mmd_block(x, y, fixed(1.0), 10);
    REQUIRE(by_default.statistic == explicit_size.statistic);
}

TEST_CASE("mmd_block needs at least two full blocks") {
    const Matrix x = reference::random_matrix(10, 2, 81);
    const Matrix y = reference::random_matrix(10, 2, 82);
    REQUIRE_THROWS_MATCHES(kts::mmd_block(x, y, fixed(1.0), 8), kts::Error,
                           Catch::Matchers::Predicate<kts::Error>([](const auto& e) {
                               return e.code() == kts::ErrorCode::SampleTooSmall;
                           }));
}

TEST_CASE("permutation_pvalue: a label-invariant statistic is never beaten") {
    const Matrix x = reference::random_matrix(12, 2, 91);
    const Matrix y = reference::random_matrix(12, 2, 92);
    const auto constant_stat = [](const Matrix&, const Matrix&) { return 3.5; };
    const double p = kts::permutation_pvalue(x, y, constant_stat, 199, 4);
    REQUIRE(p == 1.0);
}

TEST_CASE("permutation_pvalue: a separating statistic drives p to the floor") {
    Matrix x(10, 1);
    x.setConstant(10.0);
    Matrix y(10, 1);
    y.setConstant(0.0);
    const auto mean_gap = [](const Matrix& a, const Matrix& b) {
        return a.mean() - b.mean();
    };
    const double p = kts::permutation_pvalue(x, y, mean_gap, 199, 5);
    REQUIRE(p >= 1.0 / 200.0);
    REQUIRE(p <= 3.0 / 200.0);

    const double again = kts::permutation_pvalue(x, y, mean_gap, 199, 5);
    REQUIRE(p == again);
}

TEST_CASE("permutation_pvalue rejects tiny permutation counts") {
    const Matrix x = reference::random_matrix(8, 1, 93);
    const Matrix y = reference::random_matrix(8, 1, 94);
    const auto stat = [](const Matrix& a, const Matrix& b) { return a.mean() - b.mean(); };
    REQUIRE_THROWS_MATCHES(kts::permutation_pvalue(x, y, stat, 50, 0), kts::Error,
                           Catch::Matchers::Predicate<kts::Error>([](const auto& e) {
                               return e.code() == kts::ErrorCode::InvalidSpec;
                           }));
}

TEST_CASE("fast mmd_u permutation p-value agrees with the generic path") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gmd;
    spec.d = 2;
    spec.m = 30;
    spec.n = 30;
    spec.shift = 0.7;
    spec.seed = 15;
    const auto [x, y] = kts::generate(spec);

    const double sigma = kts::median_heuristic(kts::vstack(x, y), 1u << 20, 0);
    const kts::KernelConfig config = fixed(sigma);
    const double fast = kts::mmd_u_permutation_pvalue(x, y, config, 199, 6);
    const auto stat = [&](const Matrix& a, const Matrix& b) {
        return kts::mmd_u(a, b, config);
    };
    const double generic = kts::permutation_pvalue(x, y, stat, 199, 6);
    REQUIRE_THAT(fast, Catch::Matchers::WithinAbs(generic, 2.0 / 200.0));
}

TEST_CASE("fast mmd_u permutation p-value is small under a strong shift") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gmd;
    spec.d = 4;
    spec.m = 80;
    spec.n = 80;
    spec.shift = 1.5;
    spec.seed = 16;
    const auto [x, y] = kts::generate(spec);
    const double p = kts::mmd_u_permutation_pvalue(x, y, kts::KernelConfig{}, 199, 7);
    REQUIRE(p <= 0.02);
}

TEST_CASE("fast mmd_u permutation p-value enforces its size cap") {
    const Matrix x = reference::random_matrix(1600, 1, 95);
    const Matrix y = reference::random_matrix(1600, 1, 96);
    REQUIRE_THROWS_MATCHES(
        kts::mmd_u_permutation_pvalue(x, y, fixed(1.0), 199, 0), kts::Error,
        Catch::Matchers::Predicate<kts::Error>([](const auto& e) {
            return e.code() == kts::ErrorCode::InvalidSpec;
        }));
}
