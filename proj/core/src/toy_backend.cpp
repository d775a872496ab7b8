#include "rite/toy_backend.hpp"

#include <algorithm>
#include <thread>

#include "rite/error.hpp"
#include "rite/utf8.hpp"

namespace rite {

ToyBackend::ToyBackend(std::shared_ptr<const ToyLM> model, std::size_t max_in_flight)
    : model_(std::move(model)),
      max_in_flight_(max_in_flight > 0 ? max_in_flight
                                       : std::max<std::size_t>(1, std::thread::hardware_concurrency())) {}

ToyBackend::ToyBackend(const ToyLMConfig& config)
    : ToyBackend(std::make_shared<const ToyLM>(ToyLM::init_from_seed(config))) {}

BackendInfo ToyBackend::info() const {
  const auto& c = model_->config();
  return BackendInfo{"toy-lm/d" + std::to_string(c.d_model) + "-l" + std::to_string(c.n_layers) +
                         "-h" + std::to_string(c.n_heads) + "/seed=" + std::to_string(c.seed),
                     static_cast<std::size_t>(c.d_model), static_cast<std::size_t>(c.max_context)};
}

std::string ToyBackend::generate_text(std::string_view prompt, const GenConfig& cfg) const {
  if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "empty prompt");
  cfg.validate();
  const auto tokens = byte_tokenize(prompt, model_->config().max_context);
  const auto generated = model_->generate(tokens, cfg);
  return utf8::sanitize(byte_detokenize(generated));
}

TokenRange ToyBackend::span_to_tokens(std::string_view text, ByteSpan span) const {
  if (span.start >= span.end || span.end > text.size()) {
    throw Error(ErrorCode::EmptySpanCoverage, "no token overlaps the span");
  }
  return TokenRange{span.start + 1, span.end + 1};
}

EmbeddingVector ToyBackend::embed_span(const EmbedSpanRequest& req) const {
  validate_span_request(req);
  const auto tokens = byte_tokenize(req.text, model_->config().max_context);
  const std::size_t d = model_->config().d_model;

  TokenRange positions;
  if (req.pooling == PoolingMode::LastToken) {
    positions = {tokens.size() - 1, tokens.size()};
  } else {
    positions = span_to_tokens(req.text, req.span);
    if (req.pooling == PoolingMode::MeanSpanShifted) {
      // Every content position is >= 1, so the shift never drops a row here.
      positions = {positions.start - 1, positions.end - 1};
    }
  }

  // Causal model: rows past the pooled region do not influence it.
  const auto hidden = model_->forward_hidden(std::span(tokens).first(positions.end));
  std::vector<double> acc(d, 0.0);
  for (std::size_t p = positions.start; p < positions.end; ++p) {
    const auto row = hidden.row(p);
    for (std::size_t c = 0; c < d; ++c) acc[c] += row[c];
  }
  std::vector<float> out(d);
  const double n = static_cast<double>(positions.size());
  for (std::size_t c = 0; c < d; ++c) out[c] = static_cast<float>(acc[c] / n);
  return EmbeddingVector(std::move(out));
}

std::size_t ToyBackend::count_tokens(std::string_view text) const { return text.size(); }

std::string ToyBackend::truncate_to_tokens(std::string_view text, std::size_t limit) const {
  if (limit == 0) throw Error(ErrorCode::InvalidArgument, "token limit must be >= 1");
  if (text.size() <= limit) return std::string(text);
  return std::string(text.substr(0, utf8::floor_char_boundary(text, limit)));
}

}  // namespace rite
