#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace amisim {

enum class ErrorCode {
    None = 0,
    // simkernel
    PastEvent,
    NoRoute,
    InvalidDirection,
    // feeder_model
    EmptyFeeder,
    InvalidDimension,
    DimensionMismatch,
    Extrapolation,
    // metering
    NonMonotonicTime,
    // aggregator
    ForeignMeter,
    InsufficientData,
    NoData,
    UnknownMeter,
    // headend
    UnknownAggregator,
    EmptyHistory,
    // privacy_metrics
    MalformedRecord,
    DegradedReport,
    ZeroTrials,
    EmptyWindow,
    // scenario_config
    ParseError,
    ValidationError,
    // generic precondition failure
    InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::None: return "None";
    case ErrorCode::PastEvent: return "PastEvent";
    case ErrorCode::NoRoute: return "NoRoute";
    case ErrorCode::InvalidDirection: return "InvalidDirection";
    case ErrorCode::EmptyFeeder: return "EmptyFeeder";
    case ErrorCode::InvalidDimension: return "InvalidDimension";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Extrapolation: return "Extrapolation";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::ForeignMeter: return "ForeignMeter";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::UnknownMeter: return "UnknownMeter";
    case ErrorCode::UnknownAggregator: return "UnknownAggregator";
    case ErrorCode::EmptyHistory: return "EmptyHistory";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DegradedReport: return "DegradedReport";
    case ErrorCode::ZeroTrials: return "ZeroTrials";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

} // namespace amisim
