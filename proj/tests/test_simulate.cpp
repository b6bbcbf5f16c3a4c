#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "kts/simulate.hpp"
#include "oracles.hpp"

using kts::Index;
using kts::Matrix;

namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

double lag1_autocorrelation(const std::vector<std::uint8_t>& xs) {
    const double n = static_cast<double>(xs.size());
    double mean = 0.0;
    for (const auto x : xs) mean += x;
    mean /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const double c = xs[t] - mean;
        den += c * c;
        if (t + 1 < xs.size()) num += c * (xs[t + 1] - mean);
    }
    return num / den;
}

} // namespace

TEST_CASE("generators are bitwise deterministic in the seed") {
    for (const kts::Family family :
         {kts::Family::Null, kts::Family::Gmd, kts::Family::Gvd, kts::Family::LogNormal}) {
        kts::SyntheticSpec spec;
        spec.family = family;
        spec.d = 7;
        spec.m = 33;
        spec.n = 29;
        spec.a = 0.1;
        spec.seed = 99;
        const auto [x1, y1] = kts::generate(spec);
        const auto [x2, y2] = kts::generate(spec);
        REQUIRE(bitwise_equal(x1, x2));
        REQUIRE(bitwise_equal(y1, y2));

        spec.seed = 100;
        const auto [x3, y3] = kts::generate(spec);
        REQUIRE_FALSE(bitwise_equal(x1, x3));
    }
}

TEST_CASE("gmd shifts only the first coordinate of y") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gmd;
    spec.d = 2;
    spec.m = 5000;
    spec.n = 5000;
    spec.shift = 0.8;
    spec.seed = 1;
    const auto [x, y] = kts::generate(spec);
    const double se = 4.0 / std::sqrt(5000.0);
    REQUIRE_THAT(x.col(0).mean(), Catch::Matchers::WithinAbs(0.0, se));
    REQUIRE_THAT(y.col(0).mean(), Catch::Matchers::WithinAbs(0.8, se));
    REQUIRE_THAT(y.col(1).mean(), Catch::Matchers::WithinAbs(0.0, se));
}

TEST_CASE("gvd scales only the variance of the first coordinate of y") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gvd;
    spec.d = 2;
    spec.m = 5000;
    spec.n = 5000;
    spec.scale = 2.0;
    spec.seed = 2;
    const auto [x, y] = kts::generate(spec);
    const auto variance = [](const auto& col) {
        const double mean = col.mean();
        return (col.array() - mean).square().sum() / (col.size() - 1.0);
    };
    REQUIRE_THAT(variance(x.col(0)), Catch::Matchers::WithinAbs(1.0, 0.12));
    REQUIRE_THAT(variance(y.col(0)), Catch::Matchers::WithinAbs(2.0, 0.25));
    REQUIRE_THAT(variance(y.col(1)), Catch::Matchers::WithinAbs(1.0, 0.12));
}

TEST_CASE("lognormal rows have the documented marginals and correlation") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::LogNormal;
    spec.d = 4;
    spec.m = 5000;
    spec.n = 5000;
    spec.a = 0.3;
    spec.rho = 0.4;
    spec.seed = 3;
    const auto [x, y] = kts::generate(spec);
    REQUIRE((x.array() > 0.0).all());

    // Marginal of exp(N(0, 1)) has mean e^{1/2}.
    REQUIRE_THAT(x.col(0).mean(), Catch::Matchers::WithinAbs(std::exp(0.5), 0.15));

    // The underlying Gaussian has corr(rho) between adjacent coordinates and
    // mean a for Y.
    const Eigen::ArrayXd lx0 = x.col(0).array().log();
    const Eigen::ArrayXd lx1 = x.col(1).array().log();
    const double c01 = ((lx0 - lx0.mean()) * (lx1 - lx1.mean())).mean() /
                       std::sqrt((lx0 - lx0.mean()).square().mean() *
                                 (lx1 - lx1.mean()).square().mean());
    REQUIRE_THAT(c01, Catch::Matchers::WithinAbs(0.4, 0.05));
    REQUIRE_THAT(y.col(0).array().log().mean(), Catch::Matchers::WithinAbs(0.3, 0.06));
    REQUIRE_THAT(x.col(0).array().log().mean(), Catch::Matchers::WithinAbs(0.0, 0.06));
}

TEST_CASE("synthetic spec validation") {
    kts::SyntheticSpec spec;
    spec.m = 10;
    spec.n = 10;

    spec.d = 0;
    REQUIRE_THROWS_AS(kts::generate(spec), kts::Error);
    spec.d = 2;

    spec.family = kts::Family::Gvd;
    spec.scale = -1.0;
    REQUIRE_THROWS_AS(kts::generate(spec), kts::Error);
    spec.scale = 2.0;

    spec.family = kts::Family::LogNormal;
    spec.rho = 1.2;
    REQUIRE_THROWS_AS(kts::generate(spec), kts::Error);
    spec.rho = 0.4;

    spec.family = kts::Family::Gmd;
    spec.shift = std::nan("");
    REQUIRE_THROWS_AS(kts::generate(spec), kts::Error);
    spec.shift = 0.8;

    spec.m = 0;
    REQUIRE_THROWS_AS(kts::generate(spec), kts::Error);
    spec.m = 10;

    // The family-specific entry points reject the other family.
    spec.family = kts::Family::LogNormal;
    REQUIRE_THROWS_AS(kts::gen_gaussian(spec), kts::Error);
    spec.family = kts::Family::Null;
    REQUIRE_THROWS_AS(kts::gen_lognormal(spec), kts::Error);
}

TEST_CASE("run_power_experiment is deterministic, paired, and thread-invariant") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Null;
    spec.d = 3;
    spec.m = 64;
    spec.n = 64;

    std::vector<kts::MethodConfig> methods(3);
    methods[0].method = kts::Method::New;
    methods[0].assign = kts::AssignKind::Sequential;
    methods[1].method = kts::Method::New;
    methods[1].assign = kts::AssignKind::Sequential;
    methods[1].label = "new-copy";
    methods[2].method = kts::Method::MmdBlock;

    const kts::ExperimentReport a =
        kts::run_power_experiment(spec, methods, 0.2, 40, 17, 1);
    const kts::ExperimentReport b =
        kts::run_power_experiment(spec, methods, 0.2, 40, 17, 3);
    REQUIRE(a.rejections == b.rejections);
    REQUIRE(a.n_reps == 40);
    REQUIRE(a.methods.size() == 3);
    REQUIRE(a.rejections.size() == 120);

    // With sequential assignment the method consumes no per-slot randomness,
    // so identical configurations in different slots see identical per-rep
    // decisions on the shared data stream. (Shuffled assignment would not:
    // each slot draws its permutation from its own child stream.)
    std::size_t rejects0 = 0;
    for (std::size_t rep = 0; rep < 40; ++rep) {
        REQUIRE(a.rejections[rep * 3] == a.rejections[rep * 3 + 1]);
        rejects0 += a.rejections[rep * 3];
    }
    REQUIRE(a.methods[0].n_rejects == rejects0);
    REQUIRE(a.methods[0].rejection_rate ==
            static_cast<double>(rejects0) / 40.0);
    REQUIRE(a.methods[0].label == "new");
    REQUIRE(a.methods[1].label == "new-copy");
    REQUIRE(a.methods[2].label == "mmd-b");

    // Null rejection rate at alpha = 0.2 should be loosely near 0.2.
    REQUIRE(a.methods[0].rejection_rate <= 0.55);
}

TEST_CASE("experiment seeding follows the documented rep/method streams") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gmd;
    spec.d = 2;
    spec.m = 48;
    spec.n = 48;
    spec.shift = 0.5;

    std::vector<kts::MethodConfig> methods(2);
    methods[0].method = kts::Method::New;
    methods[1].method = kts::Method::MmdLinear;
    const std::uint64_t master = 23;
    const kts::ExperimentReport report =
        kts::run_power_experiment(spec, methods, 0.1, 5, master, 1);

    for (std::size_t rep = 0; rep < 5; ++rep) {
        kts::SyntheticSpec rep_spec = spec;
        rep_spec.seed = kts::child_seed(master, 2 * rep);
        const std::uint64_t test_seed = kts::child_seed(master, 2 * rep + 1);
        const auto [x, y] = kts::generate(rep_spec);
        for (std::size_t j = 0; j < 2; ++j) {
            const double p = kts::detail::method_pvalue(methods[j], x, y, 0.1,
                                                        kts::child_seed(test_seed, j), 1);
            REQUIRE(report.rejections[rep * 2 + j] == (p < 0.1 ? 1 : 0));
        }
    }
}

TEST_CASE("per-rep decisions have no serial correlation") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Null;
    spec.d = 5;
    spec.m = 64;
    spec.n = 64;
    kts::MethodConfig method;
    const kts::ExperimentReport report = kts::estimate_power(spec, method, 0.2, 400, 29, 1);
    const double rate = report.methods[0].rejection_rate;
    REQUIRE(rate > 0.02);
    REQUIRE(rate < 0.6);
    REQUIRE(std::abs(lag1_autocorrelation(report.rejections)) < 0.2);
}

TEST_CASE("estimate_power detects a strong shift") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gmd;
    spec.d = 2;
    spec.m = 256;
    spec.n = 256;
    spec.shift = 1.5;
    kts::MethodConfig method;
    const kts::ExperimentReport report = kts::estimate_power(spec, method, 0.05, 30, 31, 1);
    REQUIRE(report.methods[0].rejection_rate >= 0.9);
}

TEST_CASE("null_zscore_sample guards its inputs and is deterministic") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gmd;
    spec.d = 2;
    spec.m = 64;
    spec.n = 64;
    REQUIRE_THROWS_AS(kts::null_zscore_sample(spec, 4, 0), kts::Error);

    spec.family = kts::Family::Null;
    kts::MethodConfig linear;
    linear.method = kts::Method::MmdLinear;
    REQUIRE_THROWS_AS(kts::null_zscore_sample(spec, 4, 0, linear), kts::Error);

    const kts::NullSample a = kts::null_zscore_sample(spec, 50, 37, {}, 1);
    const kts::NullSample b = kts::null_zscore_sample(spec, 50, 37, {}, 3);
    REQUIRE(a.stat_w.size() == 50);
    REQUIRE(a.stat_d.size() == 50);
    REQUIRE(a.stat_w == b.stat_w);
    REQUIRE(a.stat_d == b.stat_d);
}

TEST_CASE("null_zscore_sample draws are centered near zero") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Null;
    spec.d = 3;
    spec.m = 128;
    spec.n = 128;
    const kts::NullSample sample = kts::null_zscore_sample(spec, 200, 41, {}, 1);
    double mean_w = 0.0, mean_d = 0.0;
    for (std::size_t i = 0; i < sample.stat_w.size(); ++i) {
        mean_w += sample.stat_w[i];
        mean_d += sample.stat_d[i];
    }
    mean_w /= 200.0;
    mean_d /= 200.0;
    REQUIRE(std::abs(mean_w) < 0.35); // 4 / sqrt(200) with margin
    REQUIRE(std::abs(mean_d) < 0.35);
}

TEST_CASE("bandwidth_sweep keeps row order and rejects bad bandwidths") {
    kts::SyntheticSpec spec;
    spec.family = kts::Family::Gmd;
    spec.d = 2;
    spec.m = 64;
    spec.n = 64;
    spec.shift = 1.0;
    const std::vector<double> bandwidths{0.5, 1.0, 2.0};
    const auto rows = kts::bandwidth_sweep(spec, bandwidths, 0.05, 20, 43);
    REQUIRE(rows.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        REQUIRE(rows[i].bandwidth == bandwidths[i]);
        REQUIRE(rows[i].rejection_rate >= 0.0);
        REQUIRE(rows[i].rejection_rate <= 1.0);
    }
    const auto again = kts::bandwidth_sweep(spec, bandwidths, 0.05, 20, 43);
    for (std::size_t i = 0; i < rows.size(); ++i)
        REQUIRE(rows[i].rejection_rate == again[i].rejection_rate);

    const std::vector<double> bad{1.0, 0.0};
    REQUIRE_THROWS_MATCHES(kts::bandwidth_sweep(spec, bad, 0.05, 5, 0), kts::Error,
                           Catch::Matchers::Predicate<kts::Error>([](const auto& e) {
                               return e.code() == kts::ErrorCode::InvalidBandwidth;
                           }));
}

TEST_CASE("ks_distance_to_std_normal on frozen and sampled inputs") {
    REQUIRE(kts::ks_distance_to_std_normal({0.0}) == 0.5);

    kts::Rng rng(123);
    std::vector<double> sample(2000);
    for (double& v : sample) v = rng.normal();
    REQUIRE(kts::ks_distance_to_std_normal(sample) < 0.05);

    for (double& v : sample) v += 1.0;
    REQUIRE(kts::ks_distance_to_std_normal(sample) > 0.2);

    REQUIRE_THROWS_AS(kts::ks_distance_to_std_normal({}), kts::Error);
}
