#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "kts/blocking.hpp"
#include "kts/kernel.hpp"
#include "kts/matrix.hpp"
#include "kts/moments.hpp"
#include "kts/parallel.hpp"

namespace kts {

inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Standardized block statistics; both have mean 0 and variance 1 under the
// within-block permutation null.
struct BlockZ {
    double z_w = 0.0;
    double z_d = 0.0;
    std::size_t block_index = 0;
};

inline BlockZ block_z_scores(double alpha, double beta, const WdMoments& moments,
                             std::size_t b1, std::size_t b2, std::size_t block_index = 0) {
    require(moments.var_w > 0.0 && moments.var_d > 0.0, ErrorCode::DegenerateBlock,
            "block " + std::to_string(block_index) +
                ": zero permutation variance (constant kernel values in the block)");
    const double s1 = static_cast<double>(b1);
    const double s2 = static_cast<double>(b2);
    const double B = s1 + s2;
    const double w = (s1 * alpha + s2 * beta) / B;
    const double d = s1 * (s1 - 1.0) * alpha - s2 * (s2 - 1.0) * beta;
    BlockZ z;
    z.z_w = (w - moments.e_w) / std::sqrt(moments.var_w);
    z.z_d = (d - moments.e_d) / std::sqrt(moments.var_d);
    z.block_index = block_index;
    return z;
}

// sqrt(b) times the mean z-score, per statistic. Blocks are summed in
// ascending block-index order so the result does not depend on how the
// caller scheduled the per-block work.
inline std::pair<double, double> aggregate(std::span<const BlockZ> blocks) {
    require(blocks.size() >= 2, ErrorCode::SampleTooSmall,
            "aggregate: need at least 2 blocks");
    std::vector<const BlockZ*> ordered(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) ordered[i] = &blocks[i];
    std::sort(ordered.begin(), ordered.end(),
              [](const BlockZ* a, const BlockZ* b) { return a->block_index < b->block_index; });
    double sum_w = 0.0;
    double sum_d = 0.0;
    for (const BlockZ* z : ordered) {
        sum_w += z->z_w;
        sum_d += z->z_d;
    }
    const double root_b = std::sqrt(static_cast<double>(blocks.size()));
    return {sum_w / root_b, sum_d / root_b};
}

enum class Combine { Bonferroni, Simes };

inline const char* to_string(Combine combine) noexcept {
    return combine == Combine::Simes ? "simes" : "bonferroni";
}

// W is one-sided (large positive values indicate a difference), D is
// two-sided. The combined p-value is Bonferroni by default; Simes is a less
// conservative alternative.
struct PValues {
    double p_w = 1.0;
    double p_d = 1.0;
    double p_combined = 1.0;
};

inline PValues p_values(double stat_w, double stat_d, Combine combine = Combine::Bonferroni) {
    require(std::isfinite(stat_w) && std::isfinite(stat_d), ErrorCode::NumericalError,
            "p_values: statistics must be finite");
    PValues p;
    p.p_w = 1.0 - std_normal_cdf(stat_w);
    p.p_d = 2.0 * (1.0 - std_normal_cdf(std::abs(stat_d)));
    const double lo = std::min(p.p_w, p.p_d);
    const double hi = std::max(p.p_w, p.p_d);
    p.p_combined = combine == Combine::Simes ? std::min(2.0 * lo, hi) : std::min(1.0, 2.0 * lo);
    return p;
}

enum class AssignKind { Sequential, Shuffled };

inline const char* to_string(AssignKind assign) noexcept {
    return assign == AssignKind::Sequential ? "seq" : "shuffle";
}

struct RunOptions {
    unsigned threads = 1;
    Combine combine = Combine::Bonferroni;
    bool per_block_diagnostics = false;
};

struct TestResult {
    double stat_w = 0.0;
    double stat_d = 0.0;
    double p_w = 1.0;
    double p_d = 1.0;
    double p_combined = 1.0;
    bool reject = false;
    double alpha_level = 0.05;
    std::size_t b = 0;
    std::vector<std::size_t> block_sizes_x;
    std::vector<std::size_t> block_sizes_y;
    double bandwidth = 0.0;
    BlockScheme scheme = BlockScheme::New;
    AssignKind assign = AssignKind::Shuffled;
    Combine combine = Combine::Bonferroni;
    std::uint64_t seed = 0;
    double elapsed_ms = 0.0;
    std::vector<BlockZ> per_block; // filled only when diagnostics are requested
};

// Full block test pipeline: bandwidth resolution on the pooled sample, block
// layout and assignment, per-block moments and z-scores, aggregation, and
// normal p-values. Deterministic given (data, config, seed); per-block work
// may be spread over options.threads without changing the result.
inline TestResult run_test(const Matrix& x, const Matrix& y, const KernelConfig& kernel,
                           BlockScheme scheme, AssignKind assign, double alpha_level,
                           std::uint64_t seed, const RunOptions& options = {}) {
    const auto start = std::chrono::steady_clock::now();
    require_same_width(x, y, "run_test");
    require(x.cols() >= 1, ErrorCode::InvalidData, "run_test: zero-dimensional data");
    require(std::isfinite(alpha_level) && alpha_level > 0.0 && alpha_level < 1.0,
            ErrorCode::InvalidSpec, "run_test: alpha_level must lie in (0, 1)");
    require_finite(x, "run_test: x");
    require_finite(y, "run_test: y");

    const auto m = static_cast<std::size_t>(x.rows());
    const auto n = static_cast<std::size_t>(y.rows());
    const double sigma = resolve_bandwidth(x, y, kernel);

    const BlockLayout layout = make_partition(m, n, scheme);
    const AssignMode mode = assign == AssignKind::Shuffled
                                ? AssignMode{ShuffledAssign{seed}}
                                : AssignMode{SequentialAssign{}};
    const BlockPartition partition = assign_blocks(m, n, layout, mode);

    std::vector<BlockZ> z(layout.blocks);
    parallel_for(layout.blocks, options.threads, [&](std::size_t i) {
        const auto& rows_x = partition.x_indices[i];
        const auto& rows_y = partition.y_indices[i];
        const auto b1 = static_cast<Index>(rows_x.size());
        const auto b2 = static_cast<Index>(rows_y.size());
        Matrix block(b1 + b2, x.cols());
        for (Index r = 0; r < b1; ++r)
            block.row(r) = x.row(static_cast<Index>(rows_x[static_cast<std::size_t>(r)]));
        for (Index r = 0; r < b2; ++r)
            block.row(b1 + r) = y.row(static_cast<Index>(rows_y[static_cast<std::size_t>(r)]));

        const Matrix kernel_matrix = gaussian_kernel_matrix(block, sigma);
        const auto [alpha, beta] = detail::alpha_beta_contiguous(kernel_matrix, b1);
        const KernelSums sums = kernel_sums(kernel_matrix);
        const PermutationMoments pm =
            permutation_moments(sums, rows_x.size(), rows_y.size());
        const WdMoments wm = wd_moments(pm, rows_x.size(), rows_y.size());
        z[i] = block_z_scores(alpha, beta, wm, rows_x.size(), rows_y.size(), i);
    });

    const auto [stat_w, stat_d] = aggregate(z);
    const PValues p = p_values(stat_w, stat_d, options.combine);

    TestResult result;
    result.stat_w = stat_w;
    result.stat_d = stat_d;
    result.p_w = p.p_w;
    result.p_d = p.p_d;
    result.p_combined = p.p_combined;
    result.reject = p.p_combined < alpha_level;
    result.alpha_level = alpha_level;
    result.b = layout.blocks;
    result.block_sizes_x = layout.sizes_x;
    result.block_sizes_y = layout.sizes_y;
    result.bandwidth = sigma;
    result.scheme = scheme;
    result.assign = assign;
    result.combine = options.combine;
    result.seed = seed;
    if (options.per_block_diagnostics) result.per_block = std::move(z);
    result.elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    return result;
}

} // namespace kts
