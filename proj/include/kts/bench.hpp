#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "kts/report.hpp"
#include "kts/simulate.hpp"

namespace kts {

struct BenchSizeResult {
    std::size_t m = 0;
    std::size_t n = 0;
    double mean_s = 0.0;
    double min_s = 0.0;
    std::vector<double> runs_s;
};

struct BenchReport {
    Index d = 0;
    std::string method;
    std::size_t n_runs = 0;
    std::vector<BenchSizeResult> sizes;
    // Least-squares slope of log(min time) against log(m + n); present with
    // two or more distinct sizes.
    std::optional<double> scaling_exponent;
};

// Wall-time of the full test (bandwidth selection, statistic, p-value) on
// standard-normal null data. Data generation is excluded from the timing;
// the min over runs is the noise-robust headline.
inline BenchReport bench_runtime(std::span<const std::pair<std::size_t, std::size_t>> sizes,
                                 Index d, const MethodConfig& method, std::size_t n_runs,
                                 std::uint64_t seed) {
    require(!sizes.empty(), ErrorCode::InvalidSpec, "bench_runtime: need at least one size");
    require(n_runs >= 3, ErrorCode::InvalidSpec, "bench_runtime: need at least 3 runs");
    require(d >= 1, ErrorCode::InvalidSpec, "bench_runtime: d must be at least 1");

    BenchReport report;
    report.d = d;
    report.method = method_label(method);
    report.n_runs = n_runs;
    for (std::size_t s = 0; s < sizes.size(); ++s) {
        BenchSizeResult size_result;
        size_result.m = sizes[s].first;
        size_result.n = sizes[s].second;
        for (std::size_t run = 0; run < n_runs; ++run) {
            SyntheticSpec spec;
            spec.family = Family::Null;
            spec.d = d;
            spec.m = sizes[s].first;
            spec.n = sizes[s].second;
            spec.seed = child_seed(seed, s * 1024 + 2 * run);
            const auto [x, y] = generate(spec);
            const std::uint64_t test_seed = child_seed(seed, s * 1024 + 2 * run + 1);
            const auto start = std::chrono::steady_clock::now();
            detail::method_pvalue(method, x, y, 0.05, test_seed, 1);
            size_result.runs_s.push_back(
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count());
        }
        double sum = 0.0;
        double min = size_result.runs_s.front();
        for (const double t : size_result.runs_s) {
            sum += t;
            min = std::min(min, t);
        }
        size_result.mean_s = sum / static_cast<double>(n_runs);
        size_result.min_s = min;
        report.sizes.push_back(std::move(size_result));
    }

    std::vector<std::pair<double, double>> points;
    for (const auto& size_result : report.sizes) {
        const double total = static_cast<double>(size_result.m + size_result.n);
        const bool fresh =
            std::none_of(points.begin(), points.end(),
                         [&](const auto& p) { return p.first == std::log(total); });
        if (fresh) points.emplace_back(std::log(total), std::log(size_result.min_s));
    }
    if (points.size() >= 2) {
        double mean_x = 0.0, mean_y = 0.0;
        for (const auto& [px, py] : points) {
            mean_x += px;
            mean_y += py;
        }
        mean_x /= static_cast<double>(points.size());
        mean_y /= static_cast<double>(points.size());
        double sxx = 0.0, sxy = 0.0;
        for (const auto& [px, py] : points) {
            sxx += (px - mean_x) * (px - mean_x);
            sxy += (px - mean_x) * (py - mean_y);
        }
        if (sxx > 0.0) report.scaling_exponent = sxy / sxx;
    }
    return report;
}

inline nlohmann::json to_json(const BenchReport& report) {
    nlohmann::json sizes = nlohmann::json::array();
    for (const auto& size_result : report.sizes)
        sizes.push_back({{"m", size_result.m},
                         {"n", size_result.n},
                         {"mean_s", size_result.mean_s},
                         {"min_s", size_result.min_s},
                         {"runs_s", size_result.runs_s}});
    nlohmann::json doc{
        {"schema_version", kSchemaVersion},
        {"kind", "bench"},
        {"d", report.d},
        {"method", report.method},
        {"n_runs", report.n_runs},
        {"sizes", std::move(sizes)},
    };
    if (report.scaling_exponent) doc["scaling_exponent"] = *report.scaling_exponent;
    return doc;
}

} // namespace kts
