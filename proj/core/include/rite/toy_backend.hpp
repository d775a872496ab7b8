#pragma once

#include <memory>

#include "rite/backend.hpp"
#include "rite/toy_lm.hpp"

namespace rite {

// In-process backend over ToyLM. Byte i of a text is token position i + 1
// (position 0 is BOS), so span mapping is exact.
class ToyBackend final : public LmBackend {
 public:
  explicit ToyBackend(std::shared_ptr<const ToyLM> model, std::size_t max_in_flight = 0);
  explicit ToyBackend(const ToyLMConfig& config);

  const ToyLM& model() const noexcept { return *model_; }

  BackendInfo info() const override;
  std::string generate_text(std::string_view prompt, const GenConfig& cfg) const override;
  EmbeddingVector embed_span(const EmbedSpanRequest& req) const override;
  TokenRange span_to_tokens(std::string_view text, ByteSpan span) const override;
  std::size_t count_tokens(std::string_view text) const override;
  std::string truncate_to_tokens(std::string_view text, std::size_t limit) const override;
  std::size_t max_in_flight() const override { return max_in_flight_; }

 private:
  std::shared_ptr<const ToyLM> model_;
  std::size_t max_in_flight_;
};

}  // namespace rite
