#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace textboot {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    EmptyMask,
    DegenerateBox,
    ParseError,
    MissingImage,
    TierViolation,
    TierMismatch,
    WrongTier,
    EmptyDataset,
    IoError,
    EmptyTrainingSet,
    NonFiniteLoss,
    VersionMismatch,
    DisjointnessViolation,
    TooLarge,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code. Every module reports domain
/// failures through this type.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace textboot
