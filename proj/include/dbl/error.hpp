#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dbl {

enum class ErrorCode {
    UnsupportedFormat,
    CorruptHeader,
    IoError,
    ShapeMismatch,
    UnsupportedRate,
    NoSignal,
    EmptyMask,
    NoForeground,
    SingularSystem,
    EmptyItemList,
    NonEvaluable,
    NoItems,
    AllUnreachable,
    IncompleteRatings,
    OutOfRange,
    EmptyInput,
    MissingItemCoverage,
    InvalidArgument,
    InvalidConfig,
    DuplicateSubmission,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so that
// callers (CLI, HTTP handlers, tests) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace dbl
