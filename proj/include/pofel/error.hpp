#pragma once

#include <stdexcept>
#include <string>

namespace pofel {

enum class ErrorCode {
  kDimensionMismatch,
  kEmptyInput,
  kZeroTotalSize,
  kZeroNorm,
  kNonFinite,
  kNonPositivePrediction,
  kInvalidArgument,
  kNoQuorum,
  kNonConvergence,
  kConfig,
  kParse,
  kIo,
  kCrypto,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kEmptyInput: return "empty-input";
    case ErrorCode::kZeroTotalSize: return "zero-total-size";
    case ErrorCode::kZeroNorm: return "zero-norm";
    case ErrorCode::kNonFinite: return "non-finite";
    case ErrorCode::kNonPositivePrediction: return "non-positive-prediction";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kNoQuorum: return "no-quorum";
    case ErrorCode::kNonConvergence: return "non-convergence";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kCrypto: return "crypto";
  }
  return "unknown";
}

}  // namespace pofel
