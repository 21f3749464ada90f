#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rankcal {

enum class ErrorCode {
    InvalidArgument,
    Infeasible,
    MaxIterations,
    DegenerateChannel,
    NoAchromaticSample,
    InsufficientData,
    DegenerateSpan,
    DegenerateGeometry,
    SingularMatrix,
    ParseError,
    EmptyCorpus,
    InsufficientVariety,
    LengthMismatch,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// Message without the code prefix, for re-wrapping with more context.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

}  // namespace rankcal
