#pragma once

#include <stdexcept>
#include <string>

namespace kts {

// Failure taxonomy for the whole library. The numeric values double as CLI
// process exit codes, so they must stay distinct, stable, and nonzero
// (0 = success, 1 = usage error reported by the argument parser).
enum class ErrorCode : int {
    InvalidData = 2,             // non-finite entries, shape mismatch
    ParseError = 3,              // malformed text input
    FormatError = 4,             // binary payload does not match declared shape
    InvalidSpec = 5,             // out-of-range configuration value
    InvalidBandwidth = 6,        // sigma not finite and positive
    DegenerateBandwidth = 7,     // median pairwise distance is zero
    InsufficientData = 8,        // too few rows to select a bandwidth
    SampleTooSmall = 9,          // cannot form at least 2 feasible blocks
    BlockTooSmall = 10,          // a block has fewer than 2 members per sample
    DegenerateBlock = 11,        // zero permutation variance within a block
    DegenerateStatistic = 12,    // zero empirical variance across increments
    UnbalancedNotSupported = 13, // baseline requires m == n
    NumericalError = 14,         // invariant broken by floating-point inputs
    InternalConsistency = 15,    // result violated a closed-form identity
};

inline const char* error_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidData: return "InvalidData";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::FormatError: return "FormatError";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::InvalidBandwidth: return "InvalidBandwidth";
        case ErrorCode::DegenerateBandwidth: return "DegenerateBandwidth";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::SampleTooSmall: return "SampleTooSmall";
        case ErrorCode::BlockTooSmall: return "BlockTooSmall";
        case ErrorCode::DegenerateBlock: return "DegenerateBlock";
        case ErrorCode::DegenerateStatistic: return "DegenerateStatistic";
        case ErrorCode::UnbalancedNotSupported: return "UnbalancedNotSupported";
        case ErrorCode::NumericalError: return "NumericalError";
        case ErrorCode::InternalConsistency: return "InternalConsistency";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    int exit_code() const noexcept { return static_cast<int>(code_); }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

} // namespace kts
