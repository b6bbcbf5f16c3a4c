#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kts/baselines.hpp"
#include "kts/kernel.hpp"
#include "kts/matrix.hpp"
#include "kts/parallel.hpp"
#include "kts/rng.hpp"
#include "kts/teststat.hpp"

namespace kts {

// Synthetic two-sample families.
//   Null      : X, Y ~ N(0, I_d)
//   Gmd       : Y shifts coordinate 0 by `shift`
//   Gvd       : Y scales the variance of coordinate 0 by `scale`
//   LogNormal : exp of correlated Gaussians with AR(1) covariance
//               0.4^|i - j|; Y's underlying mean is a * 1_d
enum class Family { Null, Gmd, Gvd, LogNormal };

inline const char* to_string(Family family) noexcept {
    switch (family) {
        case Family::Null: return "null";
        case Family::Gmd: return "gmd";
        case Family::Gvd: return "gvd";
        case Family::LogNormal: return "lognormal";
    }
    return "?";
}

struct SyntheticSpec {
    Family family = Family::Null;
    Index d = 1;
    std::size_t m = 0;
    std::size_t n = 0;
    double shift = 0.8;  // Gmd offset on coordinate 0
    double scale = 2.0;  // Gvd variance factor on coordinate 0
    double a = 0.0;      // LogNormal underlying mean for Y
    double rho = 0.4;    // LogNormal AR(1) correlation
    std::uint64_t seed = 0;
};

inline void validate(const SyntheticSpec& spec) {
    require(spec.d >= 1, ErrorCode::InvalidSpec, "synthetic spec: d must be at least 1");
    require(spec.m >= 1 && spec.n >= 1, ErrorCode::InvalidSpec,
            "synthetic spec: m and n must be at least 1");
    switch (spec.family) {
        case Family::Gmd:
            require(std::isfinite(spec.shift), ErrorCode::InvalidSpec,
                    "synthetic spec: shift must be finite");
            break;
        case Family::Gvd:
            require(std::isfinite(spec.scale) && spec.scale > 0.0, ErrorCode::InvalidSpec,
                    "synthetic spec: scale must be finite and positive");
            break;
        case Family::LogNormal:
            require(std::isfinite(spec.a), ErrorCode::InvalidSpec,
                    "synthetic spec: a must be finite");
            require(spec.rho > 0.0 && spec.rho < 1.0, ErrorCode::InvalidSpec,
                    "synthetic spec: rho must lie in (0, 1)");
            break;
        case Family::Null:
            break;
    }
}

namespace detail {

inline void fill_standard_normal(Matrix& out, Rng& rng) {
    for (Index i = 0; i < out.rows(); ++i)
        for (Index j = 0; j < out.cols(); ++j) out(i, j) = rng.normal();
}

// One row of correlated Gaussians with covariance rho^|i - j|. The recursion
// w_0 = z_0, w_j = rho w_{j-1} + sqrt(1 - rho^2) z_j is the closed form of
// the AR(1) Cholesky factor applied to iid z.
inline void fill_ar1_row(Eigen::Ref<Eigen::RowVectorXd> row, double rho, double mean,
                         Rng& rng) {
    const double root = std::sqrt(1.0 - rho * rho);
    double w = rng.normal();
    row(0) = mean + w;
    for (Index j = 1; j < row.cols(); ++j) {
        w = rho * w + root * rng.normal();
        row(j) = mean + w;
    }
}

} // namespace detail

// Gaussian families (Null, Gmd, Gvd). X rows are drawn first, then Y rows,
// from a single stream seeded with spec.seed.
inline std::pair<Matrix, Matrix> gen_gaussian(const SyntheticSpec& spec) {
    validate(spec);
    require(spec.family != Family::LogNormal, ErrorCode::InvalidSpec,
            "gen_gaussian: spec describes the log-normal family");
    Rng rng(spec.seed);
    Matrix x(static_cast<Index>(spec.m), spec.d);
    Matrix y(static_cast<Index>(spec.n), spec.d);
    detail::fill_standard_normal(x, rng);
    detail::fill_standard_normal(y, rng);
    if (spec.family == Family::Gmd) {
        y.col(0).array() += spec.shift;
    } else if (spec.family == Family::Gvd) {
        y.col(0) *= std::sqrt(spec.scale);
    }
    return {std::move(x), std::move(y)};
}

inline std::pair<Matrix, Matrix> gen_lognormal(const SyntheticSpec& spec) {
    validate(spec);
    require(spec.family == Family::LogNormal, ErrorCode::InvalidSpec,
            "gen_lognormal: spec does not describe the log-normal family");
    Rng rng(spec.seed);
    Matrix x(static_cast<Index>(spec.m), spec.d);
    Matrix y(static_cast<Index>(spec.n), spec.d);
    for (Index i = 0; i < x.rows(); ++i) detail::fill_ar1_row(x.row(i), spec.rho, 0.0, rng);
    for (Index i = 0; i < y.rows(); ++i)
        detail::fill_ar1_row(y.row(i), spec.rho, spec.a, rng);
    x = x.array().exp();
    y = y.array().exp();
    require_finite(x, "gen_lognormal: x");
    require_finite(y, "gen_lognormal: y");
    return {std::move(x), std::move(y)};
}

inline std::pair<Matrix, Matrix> generate(const SyntheticSpec& spec) {
    return spec.family == Family::LogNormal ? gen_lognormal(spec) : gen_gaussian(spec);
}

enum class Method { New, MmdU, MmdLinear, MmdBlock };

inline const char* to_string(Method method) noexcept {
    switch (method) {
        case Method::New: return "new";
        case Method::MmdU: return "mmd-u";
        case Method::MmdLinear: return "mmd-linear";
        case Method::MmdBlock: return "mmd-b";
    }
    return "?";
}

// One test method inside an experiment. The label keys the report; when
// empty it defaults to the method name (plus the scheme for the block test).
struct MethodConfig {
    Method method = Method::New;
    std::string label;
    BlockScheme scheme = BlockScheme::New;
    AssignKind assign = AssignKind::Shuffled;
    KernelConfig kernel;
    Combine combine = Combine::Bonferroni;
    std::size_t block_size = 0; // MmdBlock; 0 selects floor(sqrt(m))
    std::size_t n_perms = 200;  // MmdU permutation calibration
};

inline std::string method_label(const MethodConfig& config) {
    if (!config.label.empty()) return config.label;
    std::string label = to_string(config.method);
    if (config.method == Method::New && config.scheme != BlockScheme::New)
        label += std::string("/") + to_string(config.scheme);
    return label;
}

struct MethodSummary {
    std::string label;
    std::size_t n_rejects = 0;
    double rejection_rate = 0.0;
    double std_error = 0.0; // binomial: sqrt(rate (1 - rate) / n_reps)
    double mean_elapsed_ms = 0.0;
};

struct ExperimentReport {
    SyntheticSpec spec;
    double alpha_level = 0.05;
    std::size_t n_reps = 0;
    std::uint64_t master_seed = 0;
    std::vector<MethodSummary> methods;
    // Row-major per-rep rejection indicators, methods.size() per rep.
    std::vector<std::uint8_t> rejections;
};

namespace detail {

// p-value of one method on one dataset. The derived seed decorrelates
// assignment shuffles, median subsampling, and permutation draws from the
// data stream and from the other methods.
inline double method_pvalue(const MethodConfig& config, const Matrix& x, const Matrix& y,
                            double alpha_level, std::uint64_t seed, unsigned threads) {
    KernelConfig kernel = config.kernel;
    if (auto* median = std::get_if<MedianBandwidth>(&kernel.bandwidth))
        median->seed = child_seed(seed, 0);
    switch (config.method) {
        case Method::New: {
            RunOptions options;
            options.threads = threads;
            options.combine = config.combine;
            return run_test(x, y, kernel, config.scheme, config.assign, alpha_level,
                            child_seed(seed, 1), options)
                .p_combined;
        }
        case Method::MmdU:
            return mmd_u_permutation_pvalue(x, y, kernel, config.n_perms,
                                            child_seed(seed, 2));
        case Method::MmdLinear: {
            const MmdResult result = mmd_linear(x, y, kernel, child_seed(seed, 3));
            require(result.p_value.has_value(), ErrorCode::DegenerateStatistic,
                    "mmd_linear produced no p-value");
            return *result.p_value;
        }
        case Method::MmdBlock: {
            const MmdResult result = mmd_block(x, y, kernel, config.block_size);
            return *result.p_value;
        }
    }
    fail(ErrorCode::InvalidSpec, "unknown method");
}

} // namespace detail

// Monte-Carlo rejection rates with every method evaluated on the same
// sequence of datasets (rep r draws data with child_seed(master_seed, 2r)
// and tests with streams off child_seed(master_seed, 2r + 1)), so method
// comparisons are paired. Reps may be spread over threads; results are
// independent of the thread count.
inline ExperimentReport run_power_experiment(const SyntheticSpec& spec,
                                             std::span<const MethodConfig> methods,
                                             double alpha_level, std::size_t n_reps,
                                             std::uint64_t master_seed,
                                             unsigned threads = 1) {
    validate(spec);
    require(!methods.empty(), ErrorCode::InvalidSpec,
            "run_power_experiment: need at least one method");
    require(n_reps >= 1, ErrorCode::InvalidSpec,
            "run_power_experiment: need at least one repetition");
    require(std::isfinite(alpha_level) && alpha_level > 0.0 && alpha_level < 1.0,
            ErrorCode::InvalidSpec, "run_power_experiment: alpha_level must lie in (0, 1)");

    const std::size_t k = methods.size();
    std::vector<std::uint8_t> rejections(n_reps * k, 0);
    std::vector<double> elapsed(n_reps * k, 0.0);

    parallel_for(n_reps, threads, [&](std::size_t rep) {
        SyntheticSpec rep_spec = spec;
        rep_spec.seed = child_seed(master_seed, 2 * rep);
        const std::uint64_t test_seed = child_seed(master_seed, 2 * rep + 1);
        const auto [x, y] = generate(rep_spec);
        for (std::size_t j = 0; j < k; ++j) {
            const auto start = std::chrono::steady_clock::now();
            const double p = detail::method_pvalue(methods[j], x, y, alpha_level,
                                                   child_seed(test_seed, j), 1);
            elapsed[rep * k + j] = std::chrono::duration<double, std::milli>(
                                       std::chrono::steady_clock::now() - start)
                                       .count();
            rejections[rep * k + j] = p < alpha_level ? 1 : 0;
        }
    });

    ExperimentReport report;
    report.spec = spec;
    report.alpha_level = alpha_level;
    report.n_reps = n_reps;
    report.master_seed = master_seed;
    report.rejections = std::move(rejections);
    for (std::size_t j = 0; j < k; ++j) {
        MethodSummary summary;
        summary.label = method_label(methods[j]);
        for (std::size_t rep = 0; rep < n_reps; ++rep) {
            summary.n_rejects += report.rejections[rep * k + j];
            summary.mean_elapsed_ms += elapsed[rep * k + j];
        }
        const double reps = static_cast<double>(n_reps);
        summary.rejection_rate = static_cast<double>(summary.n_rejects) / reps;
        summary.std_error =
            std::sqrt(summary.rejection_rate * (1.0 - summary.rejection_rate) / reps);
        summary.mean_elapsed_ms /= reps;
        report.methods.push_back(std::move(summary));
    }
    return report;
}

inline ExperimentReport estimate_power(const SyntheticSpec& spec, const MethodConfig& method,
                                       double alpha_level, std::size_t n_reps,
                                       std::uint64_t master_seed, unsigned threads = 1) {
    return run_power_experiment(spec, std::span<const MethodConfig>(&method, 1), alpha_level,
                                n_reps, master_seed, threads);
}

// Null-distribution sample of the aggregated statistics: n_reps draws of
// (stat_w, stat_d) under a Null spec, seeded like run_power_experiment.
struct NullSample {
    std::vector<double> stat_w;
    std::vector<double> stat_d;
};

inline NullSample null_zscore_sample(const SyntheticSpec& spec, std::size_t n_reps,
                                     std::uint64_t master_seed,
                                     const MethodConfig& method = {}, unsigned threads = 1) {
    validate(spec);
    require(spec.family == Family::Null, ErrorCode::InvalidSpec,
            "null_zscore_sample: spec must describe the Null family");
    require(method.method == Method::New, ErrorCode::InvalidSpec,
            "null_zscore_sample: only the block test exposes (stat_w, stat_d)");
    require(n_reps >= 1, ErrorCode::InvalidSpec,
            "null_zscore_sample: need at least one repetition");

    NullSample sample;
    sample.stat_w.resize(n_reps);
    sample.stat_d.resize(n_reps);
    parallel_for(n_reps, threads, [&](std::size_t rep) {
        SyntheticSpec rep_spec = spec;
        rep_spec.seed = child_seed(master_seed, 2 * rep);
        const std::uint64_t test_seed = child_seed(master_seed, 2 * rep + 1);
        const auto [x, y] = generate(rep_spec);
        KernelConfig kernel = method.kernel;
        if (auto* median = std::get_if<MedianBandwidth>(&kernel.bandwidth))
            median->seed = child_seed(child_seed(test_seed, 0), 0);
        RunOptions options;
        options.combine = method.combine;
        const TestResult result =
            run_test(x, y, kernel, method.scheme, method.assign, 0.05,
                     child_seed(child_seed(test_seed, 0), 1), options);
        sample.stat_w[rep] = result.stat_w;
        sample.stat_d[rep] = result.stat_d;
    });
    return sample;
}

struct SweepRow {
    double bandwidth = 0.0;
    double rejection_rate = 0.0;
    double std_error = 0.0;
};

// Rejection rate per fixed bandwidth, every bandwidth evaluated on the same
// datasets (shared master seed).
inline std::vector<SweepRow> bandwidth_sweep(const SyntheticSpec& spec,
                                             std::span<const double> bandwidths,
                                             double alpha_level, std::size_t n_reps,
                                             std::uint64_t master_seed,
                                             const MethodConfig& base = {},
                                             unsigned threads = 1) {
    require(!bandwidths.empty(), ErrorCode::InvalidSpec,
            "bandwidth_sweep: need at least one bandwidth");
    std::vector<SweepRow> rows;
    rows.reserve(bandwidths.size());
    for (const double bandwidth : bandwidths) {
        require(std::isfinite(bandwidth) && bandwidth > 0.0, ErrorCode::InvalidBandwidth,
                "bandwidth_sweep: bandwidths must be finite and positive");
        MethodConfig config = base;
        config.kernel.bandwidth = FixedBandwidth{bandwidth};
        const ExperimentReport report =
            estimate_power(spec, config, alpha_level, n_reps, master_seed, threads);
        rows.push_back({bandwidth, report.methods[0].rejection_rate,
                        report.methods[0].std_error});
    }
    return rows;
}

// Kolmogorov-Smirnov distance between a sample and the standard normal.
inline double ks_distance_to_std_normal(std::vector<double> sample) {
    require(!sample.empty(), ErrorCode::InvalidSpec, "ks_distance: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double distance = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double cdf = std_normal_cdf(sample[i]);
        const double lo = static_cast<double>(i) / n;
        const double hi = static_cast<double>(i + 1) / n;
        distance = std::max({distance, std::abs(cdf - lo), std::abs(hi - cdf)});
    }
    return distance;
}

} // namespace kts
