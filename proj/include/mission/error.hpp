#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mission {

/// Every failure a module can report. The name of the enumerator is the
/// stable prefix the CLI prints in front of the message.
enum class ErrorCode : std::uint8_t {
    InvalidArgument,
    DegenerateKernel,
    InsufficientData,
    SealedLedger,
    TimestampRegression,
    MalformedFile,
    TamperedLedger,
    InvalidScenario,
    IoError,
    LengthMismatch,
    EmptyInput,
    EmptyMatrix,
    SingleClass,
    BadFoldCount,
};

constexpr std::string_view error_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DegenerateKernel: return "DegenerateKernel";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::SealedLedger: return "SealedLedger";
        case ErrorCode::TimestampRegression: return "TimestampRegression";
        case ErrorCode::MalformedFile: return "MalformedFile";
        case ErrorCode::TamperedLedger: return "TamperedLedger";
        case ErrorCode::InvalidScenario: return "InvalidScenario";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::EmptyMatrix: return "EmptyMatrix";
        case ErrorCode::SingleClass: return "SingleClass";
        case ErrorCode::BadFoldCount: return "BadFoldCount";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Ledger verification failure surfaced as an exception (replay path).
class TamperedLedgerError : public Error {
public:
    explicit TamperedLedgerError(std::uint64_t broken_at)
        : Error(ErrorCode::TamperedLedger, "BrokenAt(" + std::to_string(broken_at) + ")"),
          broken_at_(broken_at) {}

    std::uint64_t broken_at() const noexcept { return broken_at_; }

private:
    std::uint64_t broken_at_;
};

#define MISSION_REQUIRE(cond, code, msg)                 \
    do {                                                 \
        if (!(cond)) throw ::mission::Error((code), (msg)); \
    } while (0)

}  // namespace mission
