#include "textboot/error.hpp"

namespace textboot {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::EmptyMask: return "EMPTY_MASK";
    case ErrorCode::DegenerateBox: return "DEGENERATE_BOX";
    case ErrorCode::ParseError: return "PARSE_ERROR";
    case ErrorCode::MissingImage: return "MISSING_IMAGE";
    case ErrorCode::TierViolation: return "TIER_VIOLATION";
    case ErrorCode::TierMismatch: return "TIER_MISMATCH";
    case ErrorCode::WrongTier: return "WRONG_TIER";
    case ErrorCode::EmptyDataset: return "EMPTY_DATASET";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::EmptyTrainingSet: return "EMPTY_TRAINING_SET";
    case ErrorCode::NonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::VersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::DisjointnessViolation: return "DISJOINTNESS_VIOLATION";
    case ErrorCode::TooLarge: return "TOO_LARGE";
    }
    return "UNKNOWN";
}

} // namespace textboot
