#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "kts/error.hpp"
#include "kts/rng.hpp"

namespace kts {

// How block count and sizes are chosen.
//   New : b = floor(sqrt((m + n) / 2)); every observation lands in a block,
//         sizes within a sample differ by at most one.
//   A1  : B1 = floor(sqrt(m)), B2 = floor(sqrt(n)), b = min(m / B1, n / B2).
//   A2  : b = floor(sqrt(min(m, n))), B1 = m / b, B2 = n / b.
//   A3  : b = floor(sqrt(max(m, n))), B1 = m / b, B2 = n / b.
// A1-A3 use uniform sizes and discard the leftover observations.
enum class BlockScheme { New, A1, A2, A3 };

inline const char* to_string(BlockScheme scheme) noexcept {
    switch (scheme) {
        case BlockScheme::New: return "new";
        case BlockScheme::A1: return "a1";
        case BlockScheme::A2: return "a2";
        case BlockScheme::A3: return "a3";
    }
    return "?";
}

// Block count and per-block sample sizes; sizes_x[i] (B1) and sizes_y[i] (B2)
// are the number of X and Y observations in block i.
struct BlockLayout {
    std::size_t blocks = 0;
    std::vector<std::size_t> sizes_x;
    std::vector<std::size_t> sizes_y;

    std::size_t used_x() const {
        return std::accumulate(sizes_x.begin(), sizes_x.end(), std::size_t{0});
    }
    std::size_t used_y() const {
        return std::accumulate(sizes_y.begin(), sizes_y.end(), std::size_t{0});
    }
};

namespace detail {

inline std::size_t isqrt(std::size_t value) {
    auto root = static_cast<std::size_t>(std::sqrt(static_cast<double>(value)));
    while (root > 0 && root * root > value) --root;
    while ((root + 1) * (root + 1) <= value) ++root;
    return root;
}

// Largest b with 2 b^2 <= m + n, i.e. floor(sqrt((m + n) / 2)) evaluated in
// integers so no floating-point boundary case can shift the count.
inline std::size_t new_scheme_block_count(std::size_t m, std::size_t n) {
    std::size_t b = isqrt((m + n) / 2);
    while (b > 0 && 2 * b * b > m + n) --b;
    while (2 * (b + 1) * (b + 1) <= m + n) ++b;
    return b;
}

// Sizes floor(t / b) and floor(t / b) + 1 summing exactly to t; the larger
// blocks are placed last.
inline std::vector<std::size_t> balanced_sizes(std::size_t total, std::size_t blocks) {
    const std::size_t base = total / blocks;
    const std::size_t remainder = total - blocks * base;
    std::vector<std::size_t> sizes(blocks, base);
    for (std::size_t i = blocks - remainder; i < blocks; ++i) sizes[i] = base + 1;
    return sizes;
}

} // namespace detail

// Computes the block layout for samples of size m and n. If the scheme's
// nominal block count would leave fewer than 2 observations of either sample
// per block, the count is reduced to the largest feasible value; when not
// even b = 2 is feasible the samples are too small for a block test.
inline BlockLayout make_partition(std::size_t m, std::size_t n, BlockScheme scheme) {
    require(m >= 4 && n >= 4, ErrorCode::SampleTooSmall,
            "make_partition: need at least 4 observations per sample; "
            "use the quadratic mmd_u test for smaller samples");

    BlockLayout layout;
    if (scheme == BlockScheme::A1) {
        const std::size_t b1 = detail::isqrt(m);
        const std::size_t b2 = detail::isqrt(n);
        const std::size_t b = std::min(m / b1, n / b2);
        require(b >= 2, ErrorCode::SampleTooSmall,
                "make_partition: fewer than 2 feasible blocks");
        layout.blocks = b;
        layout.sizes_x.assign(b, b1);
        layout.sizes_y.assign(b, b2);
        return layout;
    }

    std::size_t b = 0;
    switch (scheme) {
        case BlockScheme::New: b = detail::new_scheme_block_count(m, n); break;
        case BlockScheme::A2: b = detail::isqrt(std::min(m, n)); break;
        case BlockScheme::A3: b = detail::isqrt(std::max(m, n)); break;
        case BlockScheme::A1: break;
    }
    // floor(m / b) >= 2 iff b <= m / 2, so feasibility is a min with m/2, n/2.
    b = std::min({b, m / 2, n / 2});
    require(b >= 2, ErrorCode::SampleTooSmall,
            "make_partition: fewer than 2 feasible blocks");

    layout.blocks = b;
    if (scheme == BlockScheme::New) {
        layout.sizes_x = detail::balanced_sizes(m, b);
        layout.sizes_y = detail::balanced_sizes(n, b);
    } else {
        layout.sizes_x.assign(b, m / b);
        layout.sizes_y.assign(b, n / b);
    }
    return layout;
}

struct SequentialAssign {};
struct ShuffledAssign {
    std::uint64_t seed = 0;
};
using AssignMode = std::variant<SequentialAssign, ShuffledAssign>;

// Row indices of each block, per sample.
struct BlockPartition {
    BlockLayout layout;
    std::vector<std::vector<std::size_t>> x_indices;
    std::vector<std::vector<std::size_t>> y_indices;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> slice_indices(
    std::size_t total, const std::vector<std::size_t>& sizes, Rng* rng) {
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (rng != nullptr) rng->shuffle(order);
    std::vector<std::vector<std::size_t>> blocks(sizes.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        blocks[i].assign(order.begin() + static_cast<std::ptrdiff_t>(offset),
                         order.begin() + static_cast<std::ptrdiff_t>(offset + sizes[i]));
        offset += sizes[i];
    }
    return blocks;
}

} // namespace detail

// Assigns observations to blocks. Sequential slices rows in their given
// order; Shuffled permutes each sample first (streams child_seed(seed, 0)
// for X and child_seed(seed, 1) for Y). Any rows beyond the layout's totals
// are the discarded remainder.
inline BlockPartition assign_blocks(std::size_t m, std::size_t n, const BlockLayout& layout,
                                    const AssignMode& mode) {
    require(layout.blocks >= 2 && layout.sizes_x.size() == layout.blocks &&
                layout.sizes_y.size() == layout.blocks,
            ErrorCode::InvalidSpec, "assign_blocks: malformed layout");
    require(layout.used_x() <= m && layout.used_y() <= n, ErrorCode::InvalidSpec,
            "assign_blocks: layout does not fit the sample sizes");

    BlockPartition partition;
    partition.layout = layout;
    if (const auto* shuffled = std::get_if<ShuffledAssign>(&mode)) {
        Rng rng_x(child_seed(shuffled->seed, 0));
        Rng rng_y(child_seed(shuffled->seed, 1));
        partition.x_indices = detail::slice_indices(m, layout.sizes_x, &rng_x);
        partition.y_indices = detail::slice_indices(n, layout.sizes_y, &rng_y);
    } else {
        partition.x_indices = detail::slice_indices(m, layout.sizes_x, nullptr);
        partition.y_indices = detail::slice_indices(n, layout.sizes_y, nullptr);
    }
    return partition;
}

} // namespace kts
