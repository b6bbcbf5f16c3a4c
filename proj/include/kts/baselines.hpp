#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "kts/blocking.hpp"
#include "kts/kernel.hpp"
#include "kts/matrix.hpp"
#include "kts/rng.hpp"
#include "kts/teststat.hpp"

namespace kts {

enum class MmdMethod { Quadratic, Linear, BlockB };

inline const char* to_string(MmdMethod method) noexcept {
    switch (method) {
        case MmdMethod::Quadratic: return "mmd-u";
        case MmdMethod::Linear: return "mmd-linear";
        case MmdMethod::BlockB: return "mmd-b";
    }
    return "?";
}

// How a baseline p-value was calibrated. Quadratic MMD has no tractable
// closed-form null, so its p-value comes from Monte-Carlo permutation;
// the linear and block statistics use their Gaussian limits.
struct NullCalibration {
    enum class Kind { None, MonteCarloPermutation, GaussianClt } kind = Kind::None;
    std::size_t n_perms = 0;
    std::uint64_t seed = 0;
};

struct MmdResult {
    MmdMethod method = MmdMethod::Quadratic;
    double statistic = 0.0;
    std::optional<double> p_value;
    double bandwidth = 0.0;
    NullCalibration null_calibration;
};

namespace detail {

// Sum of exp(-||a_i - b_j||^2 / (2 sigma^2)) over all (i, j); when skip_equal
// is set, a and b alias the same sample and i == j terms are excluded. Tiled
// so the Gram scratch stays small regardless of the sample size; summation
// order is fixed, so results are independent of any caller-side threading.
inline double kernel_pair_sum(const Matrix& a, const Matrix& b, double sigma,
                              bool skip_equal) {
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    const Eigen::VectorXd norms_a = a.rowwise().squaredNorm();
    const Eigen::VectorXd norms_b = b.rowwise().squaredNorm();
    const Index tile = 256;
    double total = 0.0;
    Matrix gram;
    for (Index row0 = 0; row0 < a.rows(); row0 += tile) {
        const Index rows = std::min(tile, a.rows() - row0);
        gram.noalias() = a.middleRows(row0, rows) * b.transpose();
        for (Index r = 0; r < rows; ++r) {
            const Index i = row0 + r;
            for (Index j = 0; j < b.rows(); ++j) {
                if (skip_equal && i == j) continue;
                const double sq = norms_a(i) + norms_b(j) - 2.0 * gram(r, j);
                total += std::exp(-(sq > 0.0 ? sq : 0.0) * inv_two_sigma_sq);
            }
        }
    }
    return total;
}

inline void check_two_sample(const Matrix& x, const Matrix& y, const char* what) {
    require_same_width(x, y, what);
    require(x.cols() >= 1, ErrorCode::InvalidData, std::string(what) + ": zero-dimensional data");
    require_finite(x, std::string(what) + ": x");
    require_finite(y, std::string(what) + ": y");
}

} // namespace detail

// Unbiased quadratic-time MMD^2 estimate. O((m + n)^2 d) time, O(1) extra
// memory beyond a fixed Gram tile.
inline double mmd_u(const Matrix& x, const Matrix& y, const KernelConfig& config) {
    detail::check_two_sample(x, y, "mmd_u");
    const auto m = static_cast<double>(x.rows());
    const auto n = static_cast<double>(y.rows());
    require(m >= 2 && n >= 2, ErrorCode::SampleTooSmall,
            "mmd_u: need at least 2 observations per sample");
    const double sigma = resolve_bandwidth(x, y, config);
    const double within_x = detail::kernel_pair_sum(x, x, sigma, true);
    const double within_y = detail::kernel_pair_sum(y, y, sigma, true);
    const double cross = detail::kernel_pair_sum(x, y, sigma, false);
    return within_x / (m * (m - 1.0)) + within_y / (n * (n - 1.0)) - 2.0 * cross / (m * n);
}

// Linear-time MMD estimate: mean of h over floor(m/2) disjoint consecutive
// pairs, with a Gaussian p-value from the across-pair empirical variance.
// Balanced designs only. With pair_shuffle_seed set, both samples are run
// through the same seeded permutation before pairing.
inline MmdResult mmd_linear(const Matrix& x, const Matrix& y, const KernelConfig& config,
                            std::optional<std::uint64_t> pair_shuffle_seed = std::nullopt) {
    detail::check_two_sample(x, y, "mmd_linear");
    require(x.rows() == y.rows(), ErrorCode::UnbalancedNotSupported,
            "mmd_linear: requires m == n");
    const Index m = x.rows();
    require(m >= 4, ErrorCode::SampleTooSmall,
            "mmd_linear: need at least 4 observations per sample");
    const double sigma = resolve_bandwidth(x, y, config);
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    const auto kernel = [&](const auto& a, const auto& b) {
        return std::exp(-(a - b).squaredNorm() * inv_two_sigma_sq);
    };

    std::vector<std::size_t> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (pair_shuffle_seed) {
        Rng rng(*pair_shuffle_seed);
        rng.shuffle(order);
    }

    const Index pairs = m / 2;
    std::vector<double> increments(static_cast<std::size_t>(pairs));
    for (Index p = 0; p < pairs; ++p) {
        const auto i = static_cast<Index>(order[static_cast<std::size_t>(2 * p)]);
        const auto j = static_cast<Index>(order[static_cast<std::size_t>(2 * p + 1)]);
        increments[static_cast<std::size_t>(p)] =
            kernel(x.row(i), x.row(j)) + kernel(y.row(i), y.row(j)) -
            kernel(x.row(i), y.row(j)) - kernel(x.row(j), y.row(i));
    }
    const double count = static_cast<double>(pairs);
    const double mean =
        std::accumulate(increments.begin(), increments.end(), 0.0) / count;

    MmdResult result;
    result.method = MmdMethod::Linear;
    result.statistic = mean;
    result.bandwidth = sigma;
    result.null_calibration.kind = NullCalibration::Kind::GaussianClt;
    const bool all_equal = std::adjacent_find(increments.begin(), increments.end(),
                                              std::not_equal_to<>()) == increments.end();
    if (all_equal) {
        // A nonzero common increment cannot be standardized; an all-zero one
        // carries no evidence either way and gets no p-value.
        require(increments[0] == 0.0, ErrorCode::DegenerateStatistic,
                "mmd_linear: zero variance across pair increments");
        result.p_value = std::nullopt;
        return result;
    }
    // Two-pass variance, nonnegative by construction.
    double variance = 0.0;
    for (const double h : increments) variance += (h - mean) * (h - mean);
    variance /= count - 1.0;
    require(variance > 0.0, ErrorCode::DegenerateStatistic,
            "mmd_linear: zero variance across pair increments");
    result.p_value = 1.0 - std_normal_cdf(mean / std::sqrt(variance / count));
    return result;
}

// Block-averaged MMD (B-test): the quadratic estimator on consecutive
// disjoint blocks of block_size observations per sample, standardized by the
// across-block empirical standard deviation, with a one-sided Gaussian
// p-value. block_size 0 selects floor(sqrt(m)). Balanced designs only;
// trailing observations that do not fill a block are discarded.
inline MmdResult mmd_block(const Matrix& x, const Matrix& y, const KernelConfig& config,
                           std::size_t block_size = 0) {
    detail::check_two_sample(x, y, "mmd_block");
    require(x.rows() == y.rows(), ErrorCode::UnbalancedNotSupported,
            "mmd_block: requires m == n");
    const auto m = static_cast<std::size_t>(x.rows());
    if (block_size == 0) block_size = detail::isqrt(m);
    require(block_size >= 2, ErrorCode::SampleTooSmall,
            "mmd_block: block_size must be at least 2");
    const std::size_t blocks = m / block_size;
    require(blocks >= 2, ErrorCode::SampleTooSmall, "mmd_block: fewer than 2 blocks");
    const double sigma = resolve_bandwidth(x, y, config);

    const auto size = static_cast<Index>(block_size);
    const double s = static_cast<double>(block_size);
    std::vector<double> etas;
    etas.reserve(blocks);
    Matrix block(2 * size, x.cols());
    for (std::size_t j = 0; j < blocks; ++j) {
        const auto offset = static_cast<Index>(j * block_size);
        block.topRows(size) = x.middleRows(offset, size);
        block.bottomRows(size) = y.middleRows(offset, size);
        const Matrix kernel_matrix = gaussian_kernel_matrix(block, sigma);
        double within_x = 0.0;
        double within_y = 0.0;
        double cross = 0.0;
        for (Index u = 0; u < size; ++u)
            for (Index v = u + 1; v < size; ++v) within_x += kernel_matrix(u, v);
        for (Index u = size; u < 2 * size; ++u)
            for (Index v = u + 1; v < 2 * size; ++v) within_y += kernel_matrix(u, v);
        for (Index u = 0; u < size; ++u)
            for (Index v = size; v < 2 * size; ++v) cross += kernel_matrix(u, v);
        etas.push_back(2.0 * within_x / (s * (s - 1.0)) +
                       2.0 * within_y / (s * (s - 1.0)) - 2.0 * cross / (s * s));
    }
    const double count = static_cast<double>(blocks);
    const double mean = std::accumulate(etas.begin(), etas.end(), 0.0) / count;
    const bool all_equal = std::adjacent_find(etas.begin(), etas.end(),
                                              std::not_equal_to<>()) == etas.end();
    require(!all_equal, ErrorCode::DegenerateStatistic,
            "mmd_block: block statistics are all equal");
    double variance = 0.0;
    for (const double eta : etas) variance += (eta - mean) * (eta - mean);
    variance /= count - 1.0;
    require(variance > 0.0, ErrorCode::DegenerateStatistic,
            "mmd_block: block statistics are all equal");

    MmdResult result;
    result.method = MmdMethod::BlockB;
    result.statistic = std::sqrt(count) * mean / std::sqrt(variance);
    result.bandwidth = sigma;
    result.p_value = 1.0 - std_normal_cdf(result.statistic);
    result.null_calibration.kind = NullCalibration::Kind::GaussianClt;
    return result;
}

// Monte-Carlo permutation p-value for an arbitrary two-sample statistic.
// Pooled rows are relabelled uniformly at random per permutation; ties with
// the observed value count towards rejection of exactness, giving the
// standard (1 + #{perm >= observed}) / (1 + n_perms) estimate.
template <typename StatFn>
double permutation_pvalue(const Matrix& x, const Matrix& y, StatFn&& statistic,
                          std::size_t n_perms, std::uint64_t seed) {
    require(n_perms >= 99, ErrorCode::InvalidSpec,
            "permutation_pvalue: need at least 99 permutations");
    require_same_width(x, y, "permutation_pvalue");
    const double observed = statistic(x, y);

    const Matrix pooled = vstack(x, y);
    const auto m = static_cast<std::size_t>(x.rows());
    const auto total = static_cast<std::size_t>(pooled.rows());
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);

    Matrix px(x.rows(), x.cols());
    Matrix py(y.rows(), y.cols());
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < n_perms; ++p) {
        rng.shuffle(order);
        for (std::size_t i = 0; i < m; ++i)
            px.row(static_cast<Index>(i)) = pooled.row(static_cast<Index>(order[i]));
        for (std::size_t i = m; i < total; ++i)
            py.row(static_cast<Index>(i - m)) = pooled.row(static_cast<Index>(order[i]));
        if (statistic(px, py) >= observed) ++at_least;
    }
    return (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(n_perms));
}

// Permutation p-value for mmd_u with the pooled kernel matrix computed once;
// each permutation only reassigns labels, costing O((m + n)^2) instead of a
// fresh kernel evaluation. The bandwidth is resolved once on the pooled
// sample and held fixed across permutations, keeping the statistic a
// function of the pooled data that is exchangeable under relabelling.
inline double mmd_u_permutation_pvalue(const Matrix& x, const Matrix& y,
                                       const KernelConfig& config, std::size_t n_perms,
                                       std::uint64_t seed) {
    detail::check_two_sample(x, y, "mmd_u_permutation_pvalue");
    require(n_perms >= 99, ErrorCode::InvalidSpec,
            "mmd_u_permutation_pvalue: need at least 99 permutations");
    const auto m = static_cast<std::size_t>(x.rows());
    const auto n = static_cast<std::size_t>(y.rows());
    require(m >= 2 && n >= 2, ErrorCode::SampleTooSmall,
            "mmd_u_permutation_pvalue: need at least 2 observations per sample");
    const std::size_t total = m + n;
    require(total <= 3000, ErrorCode::InvalidSpec,
            "mmd_u_permutation_pvalue: pooled kernel would exceed the memory budget "
            "(m + n capped at 3000); use the block test at this scale");

    const double sigma = resolve_bandwidth(x, y, config);
    const Matrix kernel_matrix = gaussian_kernel_matrix(vstack(x, y), sigma);

    std::vector<std::uint8_t> in_x(total);
    const auto stat_for_labels = [&](const std::vector<std::uint8_t>& labels) {
        double within_x = 0.0;
        double within_y = 0.0;
        double cross = 0.0;
        for (std::size_t u = 0; u < total; ++u) {
            for (std::size_t v = u + 1; v < total; ++v) {
                const double k =
                    kernel_matrix(static_cast<Index>(u), static_cast<Index>(v));
                if (labels[u] != labels[v])
                    cross += k;
                else if (labels[u])
                    within_x += k;
                else
                    within_y += k;
            }
        }
        const double dm = static_cast<double>(m);
        const double dn = static_cast<double>(n);
        return 2.0 * within_x / (dm * (dm - 1.0)) + 2.0 * within_y / (dn * (dn - 1.0)) -
               2.0 * cross / (dm * dn);
    };

    std::fill(in_x.begin(), in_x.begin() + static_cast<std::ptrdiff_t>(m), std::uint8_t{1});
    std::fill(in_x.begin() + static_cast<std::ptrdiff_t>(m), in_x.end(), std::uint8_t{0});
    const double observed = stat_for_labels(in_x);

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < n_perms; ++p) {
        rng.shuffle(order);
        for (std::size_t i = 0; i < total; ++i) in_x[order[i]] = i < m ? 1 : 0;
        if (stat_for_labels(in_x) >= observed) ++at_least;
    }
    return (1.0 + static_cast<double>(at_least)) / (1.0 + static_cast<double>(n_perms));
}

} // namespace kts
