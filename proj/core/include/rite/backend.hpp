#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "rite/prompt.hpp"
#include "rite/types.hpp"

namespace rite {

// Which last-layer hidden states form an embedding:
//   MeanSpan         mean over token positions overlapping the byte span
//   MeanSpanShifted  the same positions each shifted by -1 (the state that
//                    predicts each span token)
//   LastToken        the final token of the whole text; span ignored
enum class PoolingMode { MeanSpan, MeanSpanShifted, LastToken };

std::string_view to_string(PoolingMode mode) noexcept;        // wire names
PoolingMode parse_pooling_mode(std::string_view name);

struct EmbedSpanRequest {
  std::string text;
  ByteSpan span;
  PoolingMode pooling = PoolingMode::MeanSpan;
};

struct BackendInfo {
  std::string model_name;
  std::size_t embedding_dim = 0;
  std::size_t max_context_tokens = 0;

  friend bool operator==(const BackendInfo&, const BackendInfo&) = default;
};

// Half-open range of token positions.
struct TokenRange {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

// Throws InvalidArgument unless 0 <= start < end <= text.size() with both
// offsets on UTF-8 character boundaries. LastToken requests skip the check.
void validate_span_request(const EmbedSpanRequest& req);

// Uniform contract over language models. Implementations must accept
// concurrent calls.
class LmBackend {
 public:
  virtual ~LmBackend() = default;

  virtual BackendInfo info() const = 0;

  // Decoded continuation of `prompt` (prompt excluded).
  virtual std::string generate_text(std::string_view prompt, const GenConfig& cfg) const = 0;

  // Pooled, un-normalized last-layer hidden states. The byte span is mapped
  // to every token whose byte range overlaps it by at least one byte.
  virtual EmbeddingVector embed_span(const EmbedSpanRequest& req) const = 0;

  // Token positions (in the backend's own tokenization, specials included)
  // that overlap `span`. EmptySpanCoverage when none do.
  virtual TokenRange span_to_tokens(std::string_view text, ByteSpan span) const = 0;

  // Content tokens only; BOS and other specials are not counted.
  virtual std::size_t count_tokens(std::string_view text) const = 0;

  // Longest character-boundary prefix with count_tokens <= limit.
  virtual std::string truncate_to_tokens(std::string_view text, std::size_t limit) const = 0;

  // How many requests callers should keep in flight at once.
  virtual std::size_t max_in_flight() const { return 1; }
};

}  // namespace rite
