#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vibcnn {

enum class ErrorCode {
    // ingest
    BadHeader,
    Truncated,
    DecompressFailed,
    NoNumericArrays,
    NoChannelMatch,
    AmbiguousChannel,
    ParseError,
    EmptyFile,
    UnknownRecord,
    AmbiguousRecord,
    InvalidConfig,
    Io,
    // pipeline
    WindowTooLong,
    ZeroStride,
    ClassTooSmall,
    // nn
    KernelTooLong,
    PoolTooLong,
    ShapeMismatch,
    ShapeUnderflow,
    LabelOutOfRange,
    NonFiniteActivation,
    // train
    NonFiniteGradient,
    NonFiniteLoss,
    EmptyDataset,
    BadMagic,
    VersionUnsupported,
    TruncatedFile,
    // eval
    LengthMismatch,
    UndefinedOnEmpty,
    // tsne
    DegenerateInput,
    OneClassOnly,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::DecompressFailed: return "DecompressFailed";
    case ErrorCode::NoNumericArrays: return "NoNumericArrays";
    case ErrorCode::NoChannelMatch: return "NoChannelMatch";
    case ErrorCode::AmbiguousChannel: return "AmbiguousChannel";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::UnknownRecord: return "UnknownRecord";
    case ErrorCode::AmbiguousRecord: return "AmbiguousRecord";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::ZeroStride: return "ZeroStride";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::KernelTooLong: return "KernelTooLong";
    case ErrorCode::PoolTooLong: return "PoolTooLong";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ShapeUnderflow: return "ShapeUnderflow";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UndefinedOnEmpty: return "UndefinedOnEmpty";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    }
    return "Unknown";
}

/// Every failure in the library is reported as an `Error` carrying a code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

} // namespace vibcnn
