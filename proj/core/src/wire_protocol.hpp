#pragma once

// Shared by the remote client and the wire server.

#include <optional>
#include <string>
#include <string_view>

#include "rite/error.hpp"

namespace rite::wire {

inline constexpr const char* kGeneratePath = "/v1/generate";
inline constexpr const char* kEmbedSpanPath = "/v1/embed_span";
inline constexpr const char* kInfoPath = "/v1/info";

inline int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptySpanCoverage: return 404;
    case ErrorCode::ContextOverflow: return 413;
    case ErrorCode::UnsupportedTemperature: return 422;
    case ErrorCode::BackendUnavailable: return 503;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidConfig:
    case ErrorCode::ParseError:
    case ErrorCode::EmptySubject:
      return 400;
    default: return 500;
  }
}

inline std::optional<ErrorCode> code_from_name(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::InvariantViolation); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

inline ErrorCode code_for_status(int status) {
  switch (status) {
    case 400: return ErrorCode::InvalidArgument;
    case 404: return ErrorCode::EmptySpanCoverage;
    case 413: return ErrorCode::ContextOverflow;
    case 422: return ErrorCode::UnsupportedTemperature;
    case 503: return ErrorCode::BackendUnavailable;
    default: return ErrorCode::ProtocolError;
  }
}

}  // namespace rite::wire
