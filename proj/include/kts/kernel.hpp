#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "kts/matrix.hpp"
#include "kts/rng.hpp"

namespace kts {

enum class KernelFamily { Gaussian };

// Bandwidth selected from the median pairwise distance of the pooled sample:
// sigma = median / sqrt(2), so the kernel at a median-distance pair equals
// exp(-1) and the resolved value on standard Gaussian data in dimension d is
// close to sqrt(d). With more than subsample_size rows the median is taken
// over a seeded subsample; set subsample_size >= the pooled size to force the
// exact median.
struct MedianBandwidth {
    std::size_t subsample_size = 1000;
    std::uint64_t seed = 0;
};

struct FixedBandwidth {
    double sigma = 1.0;
};

using Bandwidth = std::variant<MedianBandwidth, FixedBandwidth>;

struct KernelConfig {
    KernelFamily family = KernelFamily::Gaussian;
    Bandwidth bandwidth = MedianBandwidth{};
};

namespace detail {

// Lower triangle of the Gram matrix points * points^T. Column-major so the
// (u, v) loops below walk down contiguous columns.
inline Eigen::MatrixXd gram_lower(const Matrix& points) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(points.rows(), points.rows());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(points);
    return gram;
}

} // namespace detail

// Squared Euclidean distances between all row pairs. Computed from one Gram
// product; rounding can push a tiny pair distance below zero, which is
// clamped. The result is exactly symmetric with a zero diagonal.
inline Matrix pairwise_sq_distances(const Matrix& points) {
    require(points.rows() >= 1 && points.cols() >= 1, ErrorCode::InvalidData,
            "pairwise_sq_distances: empty input");
    require_finite(points, "pairwise_sq_distances");
    const Index n = points.rows();
    const Eigen::MatrixXd gram = detail::gram_lower(points);
    const Eigen::VectorXd norms = gram.diagonal();
    Matrix out(n, n);
    for (Index v = 0; v < n; ++v) {
        out(v, v) = 0.0;
        for (Index u = v + 1; u < n; ++u) {
            const double sq = norms(u) + norms(v) - 2.0 * gram(u, v);
            const double clamped = sq > 0.0 ? sq : 0.0;
            out(u, v) = clamped;
            out(v, u) = clamped;
        }
    }
    return out;
}

// exp(-||x_u - x_v||^2 / (2 sigma^2)) for all row pairs; unit diagonal,
// exactly symmetric (each off-diagonal value is computed once and mirrored).
inline Matrix gaussian_kernel_matrix(const Matrix& points, double sigma) {
    require(std::isfinite(sigma) && sigma > 0.0, ErrorCode::InvalidBandwidth,
            "gaussian_kernel_matrix: sigma must be finite and positive");
    require(points.rows() >= 1 && points.cols() >= 1, ErrorCode::InvalidData,
            "gaussian_kernel_matrix: empty input");
    require_finite(points, "gaussian_kernel_matrix");
    const Index n = points.rows();
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    const Eigen::MatrixXd gram = detail::gram_lower(points);
    const Eigen::VectorXd norms = gram.diagonal();
    Matrix out(n, n);
    for (Index v = 0; v < n; ++v) {
        out(v, v) = 1.0;
        for (Index u = v + 1; u < n; ++u) {
            const double sq = norms(u) + norms(v) - 2.0 * gram(u, v);
            const double value = std::exp(-(sq > 0.0 ? sq : 0.0) * inv_two_sigma_sq);
            out(u, v) = value;
            out(v, u) = value;
        }
    }
    return out;
}

namespace detail {

// Lower median (index (K-1)/2 of the sorted K values) of the pairwise
// distances between the given rows. Squared distances come from explicit
// row differences, so duplicate rows contribute exact zeros, and the order
// statistic is taken on squared values: sqrt is monotone, so this is the
// same pair selected by the median of the distances themselves.
inline double median_pairwise_distance(const Matrix& points) {
    const Index n = points.rows();
    std::vector<double> sq;
    sq.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Index u = 0; u < n; ++u)
        for (Index v = u + 1; v < n; ++v)
            sq.push_back((points.row(u) - points.row(v)).squaredNorm());
    const std::size_t mid = (sq.size() - 1) / 2;
    std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(mid), sq.end());
    const double median_sq = sq[mid];
    require(median_sq > 0.0, ErrorCode::DegenerateBandwidth,
            "median_heuristic: median pairwise distance is zero "
            "(at least half of the sampled rows coincide)");
    return std::sqrt(median_sq);
}

// Median heuristic over the pooled rows of x and y without materialising the
// concatenation; subsample index i < x.rows() addresses x, the rest address y.
inline double median_heuristic_pooled(const Matrix& x, const Matrix& y,
                                      std::size_t subsample_size, std::uint64_t seed) {
    const std::size_t pooled = static_cast<std::size_t>(x.rows() + y.rows());
    require(pooled >= 2, ErrorCode::InsufficientData,
            "median_heuristic: need at least 2 pooled rows");
    require(subsample_size >= 2, ErrorCode::InvalidBandwidth,
            "median_heuristic: subsample_size must be at least 2");
    const std::size_t take = std::min(pooled, subsample_size);
    Matrix rows(static_cast<Index>(take), x.cols());
    if (take == pooled) {
        rows.topRows(x.rows()) = x;
        rows.bottomRows(y.rows()) = y;
    } else {
        Rng rng(seed);
        const auto picked = rng.sample_without_replacement(pooled, take);
        for (std::size_t i = 0; i < take; ++i) {
            const auto idx = static_cast<Index>(picked[i]);
            rows.row(static_cast<Index>(i)) =
                idx < x.rows() ? x.row(idx) : y.row(idx - x.rows());
        }
    }
    return median_pairwise_distance(rows);
}

} // namespace detail

// Median-distance bandwidth of a pooled sample. Deterministic given the seed;
// the lower median is used when the pair count is even.
inline double median_heuristic(const Matrix& pooled, std::size_t subsample_size = 1000,
                               std::uint64_t seed = 0) {
    require(pooled.rows() >= 2, ErrorCode::InsufficientData,
            "median_heuristic: need at least 2 rows");
    require_finite(pooled, "median_heuristic");
    const Matrix empty(0, pooled.cols());
    return detail::median_heuristic_pooled(pooled, empty, subsample_size, seed);
}

// Resolves a bandwidth specification against the pooled sample (x, y).
inline double resolve_bandwidth(const Matrix& x, const Matrix& y, const KernelConfig& config) {
    if (const auto* fixed = std::get_if<FixedBandwidth>(&config.bandwidth)) {
        require(std::isfinite(fixed->sigma) && fixed->sigma > 0.0, ErrorCode::InvalidBandwidth,
                "bandwidth: sigma must be finite and positive");
        return fixed->sigma;
    }
    const auto& median = std::get<MedianBandwidth>(config.bandwidth);
    // sigma = median / sqrt(2) makes the kernel exp(-dist^2 / median^2): a
    // median-distance pair maps to exp(-1), and the resolved sigma on standard
    // Gaussian data is about sqrt(d) rather than sqrt(2 d).
    return detail::median_heuristic_pooled(x, y, median.subsample_size, median.seed) /
           std::sqrt(2.0);
}

} // namespace kts
