#include "rite/backend.hpp"

#include "rite/error.hpp"
#include "rite/utf8.hpp"

namespace rite {

std::string_view to_string(PoolingMode mode) noexcept {
  switch (mode) {
    case PoolingMode::MeanSpan: return "mean_span";
    case PoolingMode::MeanSpanShifted: return "mean_span_shifted";
    case PoolingMode::LastToken: return "last_token";
  }
  return "unknown";
}

PoolingMode parse_pooling_mode(std::string_view name) {
  if (name == "mean_span") return PoolingMode::MeanSpan;
  if (name == "mean_span_shifted") return PoolingMode::MeanSpanShifted;
  if (name == "last_token") return PoolingMode::LastToken;
  throw Error(ErrorCode::InvalidArgument, "unknown pooling mode '" + std::string(name) + "'");
}

void validate_span_request(const EmbedSpanRequest& req) {
  if (req.pooling == PoolingMode::LastToken) return;
  const auto [start, end] = req.span;
  if (!(start < end) || end > req.text.size()) {
    throw Error(ErrorCode::InvalidArgument, "span [" + std::to_string(start) + ", " +
                                                std::to_string(end) + ") is empty, reversed, or out of range");
  }
  if (!utf8::is_char_boundary(req.text, start) || !utf8::is_char_boundary(req.text, end)) {
    throw Error(ErrorCode::InvalidArgument, "span offsets must fall on UTF-8 character boundaries");
  }
}

}  // namespace rite
