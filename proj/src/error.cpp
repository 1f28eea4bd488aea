#include "dbl/error.hpp"

namespace dbl {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedRate: return "UnsupportedRate";
    case ErrorCode::NoSignal: return "NoSignal";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoForeground: return "NoForeground";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::EmptyItemList: return "EmptyItemList";
    case ErrorCode::NonEvaluable: return "NonEvaluable";
    case ErrorCode::NoItems: return "NoItems";
    case ErrorCode::AllUnreachable: return "AllUnreachable";
    case ErrorCode::IncompleteRatings: return "IncompleteRatings";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingItemCoverage: return "MissingItemCoverage";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DuplicateSubmission: return "DuplicateSubmission";
    }
    return "Unknown";
}

}  // namespace dbl
