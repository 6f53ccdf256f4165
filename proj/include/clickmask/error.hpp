#pragma once

#include <stdexcept>
#include <string>

namespace clickmask {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    OutOfRange,
    NoPositiveClick,
    SolverNonConvergence,
    EmptyInput,
    ParseError,
    UnsupportedFormat,
    CorruptFile,
    IoFailure,
    NotFound,
    Conflict,
};

const char* to_string(ErrorCode code);

/// Exception carried by every fallible operation in the library.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace clickmask
