#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "rite/backend.hpp"

namespace rite {

struct RemoteOptions {
  std::string url;  // e.g. "http://127.0.0.1:8080"
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{120000};
};

// HTTP client for a model server speaking the /v1 wire protocol:
//   POST /v1/generate, POST /v1/embed_span, GET /v1/info.
// Connection failures raise BackendUnavailable; malformed responses raise
// ProtocolError; server status codes map back onto ErrorCode.
class RemoteBackend final : public LmBackend {
 public:
  explicit RemoteBackend(RemoteOptions options);
  ~RemoteBackend() override;

  BackendInfo info() const override;
  std::string generate_text(std::string_view prompt, const GenConfig& cfg) const override;
  EmbeddingVector embed_span(const EmbedSpanRequest& req) const override;
  TokenRange span_to_tokens(std::string_view text, ByteSpan span) const override;
  std::size_t count_tokens(std::string_view text) const override;
  std::string truncate_to_tokens(std::string_view text, std::size_t limit) const override;
  std::size_t max_in_flight() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rite
