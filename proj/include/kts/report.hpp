#pragma once

#include <json.hpp>

#include <string>

#include "kts/baselines.hpp"
#include "kts/simulate.hpp"
#include "kts/teststat.hpp"

namespace kts {

// Version of every JSON document the library emits. Bump on any change to
// field names or meanings.
inline constexpr int kSchemaVersion = 1;

inline nlohmann::json to_json(const TestResult& result) {
    nlohmann::json doc{
        {"schema_version", kSchemaVersion},
        {"kind", "test"},
        {"method", "new"},
        {"stat_w", result.stat_w},
        {"stat_d", result.stat_d},
        {"p_w", result.p_w},
        {"p_d", result.p_d},
        {"p_combined", result.p_combined},
        {"reject", result.reject},
        {"alpha_level", result.alpha_level},
        {"b", result.b},
        {"block_sizes", {{"x", result.block_sizes_x}, {"y", result.block_sizes_y}}},
        {"bandwidth", result.bandwidth},
        {"scheme", to_string(result.scheme)},
        {"assign", to_string(result.assign)},
        {"combine", to_string(result.combine)},
        {"seed", result.seed},
        {"elapsed_ms", result.elapsed_ms},
    };
    if (!result.per_block.empty()) {
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& z : result.per_block)
            blocks.push_back({{"block", z.block_index}, {"z_w", z.z_w}, {"z_d", z.z_d}});
        doc["per_block"] = std::move(blocks);
    }
    return doc;
}

inline nlohmann::json to_json(const MmdResult& result, double alpha_level,
                              std::uint64_t seed, double elapsed_ms) {
    nlohmann::json doc{
        {"schema_version", kSchemaVersion},
        {"kind", "test"},
        {"method", to_string(result.method)},
        {"statistic", result.statistic},
        {"bandwidth", result.bandwidth},
        {"alpha_level", alpha_level},
        {"seed", seed},
        {"elapsed_ms", elapsed_ms},
    };
    if (result.p_value) {
        doc["p_value"] = *result.p_value;
        doc["reject"] = *result.p_value < alpha_level;
    } else {
        doc["p_value"] = nullptr;
        doc["reject"] = false;
    }
    switch (result.null_calibration.kind) {
        case NullCalibration::Kind::MonteCarloPermutation:
            doc["null_calibration"] = {{"kind", "permutation"},
                                       {"n_perms", result.null_calibration.n_perms}};
            break;
        case NullCalibration::Kind::GaussianClt:
            doc["null_calibration"] = {{"kind", "gaussian-clt"}};
            break;
        case NullCalibration::Kind::None:
            doc["null_calibration"] = {{"kind", "none"}};
            break;
    }
    return doc;
}

inline nlohmann::json to_json(const SyntheticSpec& spec) {
    nlohmann::json doc{
        {"family", to_string(spec.family)},
        {"d", spec.d},
        {"m", spec.m},
        {"n", spec.n},
    };
    switch (spec.family) {
        case Family::Gmd: doc["shift"] = spec.shift; break;
        case Family::Gvd: doc["scale"] = spec.scale; break;
        case Family::LogNormal:
            doc["a"] = spec.a;
            doc["rho"] = spec.rho;
            break;
        case Family::Null: break;
    }
    return doc;
}

inline nlohmann::json to_json(const ExperimentReport& report) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& method : report.methods)
        methods.push_back({{"label", method.label},
                           {"n_rejects", method.n_rejects},
                           {"rejection_rate", method.rejection_rate},
                           {"std_error", method.std_error},
                           {"mean_elapsed_ms", method.mean_elapsed_ms}});
    return nlohmann::json{
        {"schema_version", kSchemaVersion},
        {"kind", "experiment"},
        {"spec", to_json(report.spec)},
        {"alpha_level", report.alpha_level},
        {"n_reps", report.n_reps},
        {"seed", report.master_seed},
        {"methods", std::move(methods)},
    };
}

inline nlohmann::json sweep_to_json(const SyntheticSpec& spec,
                                    const std::vector<SweepRow>& rows, double alpha_level,
                                    std::size_t n_reps, std::uint64_t seed) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : rows)
        out.push_back({{"bandwidth", row.bandwidth},
                       {"rejection_rate", row.rejection_rate},
                       {"std_error", row.std_error}});
    return nlohmann::json{
        {"schema_version", kSchemaVersion},
        {"kind", "sweep"},
        {"spec", to_json(spec)},
        {"alpha_level", alpha_level},
        {"n_reps", n_reps},
        {"seed", seed},
        {"rows", std::move(out)},
    };
}

} // namespace kts
