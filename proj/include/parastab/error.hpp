#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace parastab {

/// Failure categories surfaced by the solvers and probes.
enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    NonlinearStepDivergence,
    NotStabilizable,
    MaxIterations,
    FitUnreliable,
    SubproblemNonconvex,
    EnumerationTooLarge,
    EigensolverFailure,
    Io,
};

inline constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NonlinearStepDivergence: return "NonlinearStepDivergence";
        case ErrorCode::NotStabilizable: return "NotStabilizable";
        case ErrorCode::MaxIterations: return "MaxIterations";
        case ErrorCode::FitUnreliable: return "FitUnreliable";
        case ErrorCode::SubproblemNonconvex: return "SubproblemNonconvex";
        case ErrorCode::EnumerationTooLarge: return "EnumerationTooLarge";
        case ErrorCode::EigensolverFailure: return "EigensolverFailure";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// Input validation failures as opposed to numerical failures.
    bool is_validation() const noexcept {
        return code_ == ErrorCode::InvalidArgument || code_ == ErrorCode::DimensionMismatch;
    }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) {
        throw Error(code, what);
    }
}

inline void require_dims(std::size_t got, std::size_t expected, std::string_view what) {
    if (got != expected) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": expected " + std::to_string(expected) + ", got " +
                        std::to_string(got));
    }
}

}  // namespace parastab
