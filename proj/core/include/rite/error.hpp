#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rite {

enum class ErrorCode {
  InvalidArgument,
  ZeroVector,
  DimMismatch,
  EmptySubject,
  MissingReasoning,
  UnexpectedReasoning,
  EmptyReasoning,
  InvalidConfig,
  ContextOverflow,
  UnsupportedTemperature,
  EmptySpanCoverage,
  BackendUnavailable,
  ProtocolError,
  ParseError,
  DuplicateId,
  DuplicateQueryId,
  NegativeRelevance,
  KMismatch,
  IoError,
  FormatError,
  ChecksumError,
  InvariantViolation,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure in the library surfaces as rite::Error; code() is the
// machine-readable part, what() carries the context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rite
