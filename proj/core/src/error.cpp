#include "rite/error.hpp"

namespace rite {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptySubject: return "EmptySubject";
    case ErrorCode::MissingReasoning: return "MissingReasoning";
    case ErrorCode::UnexpectedReasoning: return "UnexpectedReasoning";
    case ErrorCode::EmptyReasoning: return "EmptyReasoning";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::UnsupportedTemperature: return "UnsupportedTemperature";
    case ErrorCode::EmptySpanCoverage: return "EmptySpanCoverage";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DuplicateQueryId: return "DuplicateQueryId";
    case ErrorCode::NegativeRelevance: return "NegativeRelevance";
    case ErrorCode::KMismatch: return "KMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::ChecksumError: return "ChecksumError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace rite
