#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace btrip {

enum class ErrorCode {
  NotPositiveDefinite,
  DimensionMismatch,
  DomainError,
  EmptySlice,
  UninitializedClass,
  StaleTrace,
  BadMagic,
  TruncatedFile,
  CountMismatch,
  InsufficientClassInstances,
  KTooLarge,
  IndexOutOfRange,
  ChecksumMismatch,
  ConfigError,
  IoError,
  NumericFailure,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Cholesky breakdown; carries the zero-based pivot where the leading minor
// stopped being positive.
class NotPositiveDefiniteError : public Error {
 public:
  explicit NotPositiveDefiniteError(std::size_t pivot)
      : Error(ErrorCode::NotPositiveDefinite,
              "matrix is not positive definite (pivot " + std::to_string(pivot) + ")"),
        pivot_(pivot) {}

  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require_dims(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    fail(ErrorCode::DimensionMismatch,
         std::string(what) + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace btrip
