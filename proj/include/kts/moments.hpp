#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>

#include "kts/matrix.hpp"

namespace kts {

// Power sums of a block kernel matrix over distinct-index tuples:
//   r0 = sum_{u != v} k_uv
//   r1 = sum_{u != v} k_uv^2
//   r2 = sum over ordered triples (u, v, r) distinct of k_uv k_ur
//   r3 = sum over ordered quadruples (u, v, r, s) distinct of k_uv k_rs
struct KernelSums {
    double r0 = 0.0;
    double r1 = 0.0;
    double r2 = 0.0;
    double r3 = 0.0;
};

// One pass over the upper triangle; r2 and r3 follow from the identities
//   r2 = sum_u d_u^2 - r1          (d_u = row sum without the diagonal)
//   r3 = r0^2 - 2 r1 - 4 r2
// which keep the cost at O(B^2) instead of O(B^3) / O(B^4).
// The matrix must be symmetric; its diagonal is ignored.
inline KernelSums kernel_sums(const Matrix& block_kernel) {
    const Index b = block_kernel.rows();
    require(block_kernel.cols() == b, ErrorCode::InvalidData,
            "kernel_sums: matrix must be square");
    require(b >= 4, ErrorCode::BlockTooSmall,
            "kernel_sums: need at least 4 pooled observations in the block");

    double sum_k = 0.0;
    double sum_k_sq = 0.0;
    Eigen::VectorXd degree = Eigen::VectorXd::Zero(b);
    for (Index u = 0; u < b; ++u) {
        for (Index v = u + 1; v < b; ++v) {
            const double k = block_kernel(u, v);
            sum_k += k;
            sum_k_sq += k * k;
            degree(u) += k;
            degree(v) += k;
        }
    }
    KernelSums sums;
    sums.r0 = 2.0 * sum_k;
    sums.r1 = 2.0 * sum_k_sq;
    sums.r2 = degree.squaredNorm() - sums.r1;
    sums.r3 = sums.r0 * sums.r0 - 2.0 * sums.r1 - 4.0 * sums.r2;
    return sums;
}

// Exact first and second moments of the within-group kernel means (alpha for
// the group of size b1, beta for the group of size b2) under uniformly random
// assignment of the b1 + b2 pooled observations to the two groups.
struct PermutationMoments {
    double e_alpha = 0.0; // E(alpha) = E(beta) = r0 / (B (B - 1))
    double var_alpha = 0.0;
    double var_beta = 0.0;
    double cov_ab = 0.0;
};

namespace detail {

// Variances are analytically nonnegative; tiny negative values are rounding
// and are clamped to zero. A clearly negative variance on a non-constant
// kernel means the closed-form identities were violated, which is a bug,
// not data degeneracy.
inline double clamp_variance(double value, double scale, const char* what) {
    if (value >= 0.0) return value;
    require(value >= -1e-8 * scale, ErrorCode::InternalConsistency,
            std::string(what) + ": variance " + std::to_string(value) +
                " is negative beyond rounding tolerance");
    return 0.0;
}

} // namespace detail

// Moments of the permutation null from the kernel power sums, for group
// sizes b1 and b2 (B = b1 + b2 >= 4 pooled observations). A constant kernel
// yields zero variances; degeneracy is enforced where a z-score is formed.
inline PermutationMoments permutation_moments(const KernelSums& sums, std::size_t b1,
                                              std::size_t b2) {
    require(b1 >= 2 && b2 >= 2, ErrorCode::BlockTooSmall,
            "permutation_moments: each group needs at least 2 members");

    const double s1 = static_cast<double>(b1);
    const double s2 = static_cast<double>(b2);
    const double B = s1 + s2;
    const double pool2 = B * (B - 1.0);
    const double pool3 = pool2 * (B - 2.0);
    const double pool4 = pool3 * (B - 3.0);

    const double e = sums.r0 / pool2;

    const double p1 = s1 * (s1 - 1.0) / pool2;
    const double p2 = s1 * (s1 - 1.0) * (s1 - 2.0) / pool3;
    const double p3 = s1 * (s1 - 1.0) * (s1 - 2.0) * (s1 - 3.0) / pool4;
    const double q1 = s2 * (s2 - 1.0) / pool2;
    const double q2 = s2 * (s2 - 1.0) * (s2 - 2.0) / pool3;
    const double q3 = s2 * (s2 - 1.0) * (s2 - 2.0) * (s2 - 3.0) / pool4;

    const double denom_a = s1 * s1 * (s1 - 1.0) * (s1 - 1.0);
    const double denom_b = s2 * s2 * (s2 - 1.0) * (s2 - 1.0);
    double var_a = (2.0 * sums.r1 * p1 + 4.0 * sums.r2 * p2 + sums.r3 * p3) / denom_a - e * e;
    double var_b = (2.0 * sums.r1 * q1 + 4.0 * sums.r2 * q2 + sums.r3 * q3) / denom_b - e * e;
    const double cov = sums.r3 / pool4 - e * e;

    // Constant off-diagonal kernel iff the off-diagonal values have zero
    // spread, detectable from the sums alone.
    const double mean_k = sums.r0 / pool2;
    const double spread = sums.r1 / pool2 - mean_k * mean_k;
    const bool constant_kernel = spread <= 1e-12 * (mean_k * mean_k + 1.0);

    const double scale = e * e + 1.0;
    PermutationMoments moments;
    moments.e_alpha = e;
    if (constant_kernel) {
        // Every assignment sees the same alpha and beta; the analytic second
        // moments are exact zeros, so rounding residue must not leak out and
        // later masquerade as a usable variance.
        return moments;
    }
    moments.var_alpha = detail::clamp_variance(var_a, scale, "permutation_moments");
    moments.var_beta = detail::clamp_variance(var_b, scale, "permutation_moments");
    moments.cov_ab = cov;
    return moments;
}

// Observed within-group kernel means for an explicit 0/1 labelling of the
// block's pooled rows: alpha over the label-0 pairs, beta over the label-1
// pairs.
inline std::pair<double, double> alpha_beta(const Matrix& block_kernel,
                                            std::span<const std::uint8_t> labels) {
    const Index b = block_kernel.rows();
    require(block_kernel.cols() == b, ErrorCode::InvalidData,
            "alpha_beta: matrix must be square");
    require(std::cmp_equal(labels.size(), b), ErrorCode::InvalidData,
            "alpha_beta: one label per row required");

    std::size_t b1 = 0;
    for (const auto label : labels) {
        require(label <= 1, ErrorCode::InvalidData, "alpha_beta: labels must be 0 or 1");
        b1 += label == 0 ? 1 : 0;
    }
    const std::size_t b2 = labels.size() - b1;
    require(b1 >= 2 && b2 >= 2, ErrorCode::BlockTooSmall,
            "alpha_beta: each group needs at least 2 members");

    double sum0 = 0.0;
    double sum1 = 0.0;
    for (Index u = 0; u < b; ++u) {
        for (Index v = u + 1; v < b; ++v) {
            if (labels[static_cast<std::size_t>(u)] != labels[static_cast<std::size_t>(v)])
                continue;
            if (labels[static_cast<std::size_t>(u)] == 0)
                sum0 += block_kernel(u, v);
            else
                sum1 += block_kernel(u, v);
        }
    }
    const double s1 = static_cast<double>(b1);
    const double s2 = static_cast<double>(b2);
    return {2.0 * sum0 / (s1 * (s1 - 1.0)), 2.0 * sum1 / (s2 * (s2 - 1.0))};
}

namespace detail {

// alpha and beta when the block's kernel rows are ordered with the b1
// group-0 rows first. Same quantity as alpha_beta with sorted labels.
inline std::pair<double, double> alpha_beta_contiguous(const Matrix& block_kernel,
                                                       Index b1) {
    const Index b = block_kernel.rows();
    double sum0 = 0.0;
    double sum1 = 0.0;
    for (Index u = 0; u < b1; ++u)
        for (Index v = u + 1; v < b1; ++v) sum0 += block_kernel(u, v);
    for (Index u = b1; u < b; ++u)
        for (Index v = u + 1; v < b; ++v) sum1 += block_kernel(u, v);
    const double s1 = static_cast<double>(b1);
    const double s2 = static_cast<double>(b - b1);
    return {2.0 * sum0 / (s1 * (s1 - 1.0)), 2.0 * sum1 / (s2 * (s2 - 1.0))};
}

} // namespace detail

// Null moments of the two block statistics
//   W = (b1 alpha + b2 beta) / B
//   D = b1 (b1 - 1) alpha - b2 (b2 - 1) beta
// derived from the alpha/beta moments. Variances are clamped at zero.
struct WdMoments {
    double e_w = 0.0;
    double var_w = 0.0;
    double e_d = 0.0;
    double var_d = 0.0;
};

inline WdMoments wd_moments(const PermutationMoments& moments, std::size_t b1,
                            std::size_t b2) {
    require(b1 >= 2 && b2 >= 2, ErrorCode::BlockTooSmall,
            "wd_moments: each group needs at least 2 members");
    const double s1 = static_cast<double>(b1);
    const double s2 = static_cast<double>(b2);
    const double B = s1 + s2;
    const double wa = s1 / B;
    const double wb = s2 / B;
    const double p = s1 * (s1 - 1.0);
    const double q = s2 * (s2 - 1.0);

    WdMoments out;
    out.e_w = moments.e_alpha;
    out.e_d = (p - q) * moments.e_alpha;
    const double var_w = wa * wa * moments.var_alpha + wb * wb * moments.var_beta +
                         2.0 * wa * wb * moments.cov_ab;
    const double var_d = p * p * moments.var_alpha + q * q * moments.var_beta -
                         2.0 * p * q * moments.cov_ab;
    out.var_w = var_w > 0.0 ? var_w : 0.0;
    out.var_d = var_d > 0.0 ? var_d : 0.0;
    return out;
}

} // namespace kts
