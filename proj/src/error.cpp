#include "btrip/error.hpp"

namespace btrip {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EmptySlice: return "EmptySlice";
    case ErrorCode::UninitializedClass: return "UninitializedClass";
    case ErrorCode::StaleTrace: return "StaleTrace";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::InsufficientClassInstances: return "InsufficientClassInstances";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

}  // namespace btrip
