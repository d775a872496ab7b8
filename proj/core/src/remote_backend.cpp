#include "rite/remote_backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <semaphore>

#include "rite/error.hpp"
#include "rite/utf8.hpp"
#include "wire_protocol.hpp"

namespace rite {

using nlohmann::json;

struct RemoteBackend::Impl {
  RemoteOptions options;
  std::counting_semaphore<1024> slots;
  mutable std::mutex info_mutex;
  mutable std::optional<BackendInfo> info;

  explicit Impl(RemoteOptions opts)
      : options(std::move(opts)),
        slots(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(options.max_in_flight, 1, 1024))) {}

  json call(const char* method, const char* path, const json* body) {
    slots.acquire();
    struct Release {
      std::counting_semaphore<1024>& s;
      ~Release() { s.release(); }
    } release{slots};

    httplib::Client client(options.url);
    client.set_connection_timeout(std::min(options.timeout, std::chrono::milliseconds(5000)));
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);

    httplib::Result res = std::string_view(method) == "GET"
                              ? client.Get(path)
                              : client.Post(path, body->dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::BackendUnavailable,
                  options.url + path + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      ErrorCode code = wire::code_for_status(res->status);
      std::string message = "HTTP " + std::to_string(res->status);
      try {
        const auto err = json::parse(res->body).at("error");
        if (const auto named = wire::code_from_name(err.value("code", ""))) code = *named;
        message += ": " + err.value("message", std::string{});
      } catch (const std::exception&) {
      }
      throw Error(code, options.url + path + " " + message);
    }
    try {
      return json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProtocolError, std::string("malformed JSON from ") + path + ": " + e.what());
    }
  }

  json embed(std::string_view text, ByteSpan span, PoolingMode pooling) {
    json body = {{"text", std::string(text)}, {"pooling", std::string(to_string(pooling))}};
    if (pooling != PoolingMode::LastToken) body["span"] = {{"start", span.start}, {"end", span.end}};
    return call("POST", wire::kEmbedSpanPath, &body);
  }
};

RemoteBackend::RemoteBackend(RemoteOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  const auto& url = impl_->options.url;
  if (!url.starts_with("http://") || url.size() == 7) {
    throw Error(ErrorCode::InvalidConfig, "remote backend URL must look like http://host:port, got '" + url + "'");
  }
}

RemoteBackend::~RemoteBackend() = default;

std::size_t RemoteBackend::max_in_flight() const { return impl_->options.max_in_flight; }

BackendInfo RemoteBackend::info() const {
  std::lock_guard lock(impl_->info_mutex);
  if (!impl_->info) {
    const json j = impl_->call("GET", wire::kInfoPath, nullptr);
    try {
      impl_->info = BackendInfo{j.at("model").get<std::string>(), j.at("dim").get<std::size_t>(),
                                j.at("max_context").get<std::size_t>()};
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ProtocolError, std::string("bad /v1/info response: ") + e.what());
    }
  }
  return *impl_->info;
}

std::string RemoteBackend::generate_text(std::string_view prompt, const GenConfig& cfg) const {
  if (prompt.empty()) throw Error(ErrorCode::InvalidArgument, "empty prompt");
  cfg.validate();
  const json body = {{"prompt", std::string(prompt)},
                     {"max_tokens", cfg.max_tokens},
                     {"temperature", cfg.temperature},
                     {"frequency_penalty", cfg.frequency_penalty},
                     {"n", cfg.n_choices},
                     {"stop", cfg.stop_sequences}};
  const json j = impl_->call("POST", wire::kGeneratePath, &body);
  try {
    const auto& choices = j.at("choices");
    if (choices.size() != 1) {
      throw Error(ErrorCode::ProtocolError, "expected exactly one choice, got " + std::to_string(choices.size()));
    }
    return choices.at(0).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("bad /v1/generate response: ") + e.what());
  }
}

EmbeddingVector RemoteBackend::embed_span(const EmbedSpanRequest& req) const {
  validate_span_request(req);
  const json j = impl_->embed(req.text, req.span, req.pooling);
  std::vector<float> values;
  try {
    values = j.at("embedding").get<std::vector<float>>();
    if (j.contains("dim") && j.at("dim").get<std::size_t>() != values.size()) {
      throw Error(ErrorCode::ProtocolError, "embedding length disagrees with dim");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("bad /v1/embed_span response: ") + e.what());
  }
  const auto expected = info().embedding_dim;
  if (values.size() != expected) {
    throw Error(ErrorCode::ProtocolError, "server returned dim " + std::to_string(values.size()) +
                                              ", info reports " + std::to_string(expected));
  }
  try {
    return EmbeddingVector(std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorCode::ProtocolError, e.what());
  }
}

TokenRange RemoteBackend::span_to_tokens(std::string_view text, ByteSpan span) const {
  validate_span_request(EmbedSpanRequest{std::string(text), span, PoolingMode::MeanSpan});
  const json j = impl_->embed(text, span, PoolingMode::MeanSpan);
  try {
    const auto& ts = j.at("token_span");
    return TokenRange{ts.at("start").get<std::size_t>(), ts.at("end").get<std::size_t>()};
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, std::string("missing token_span: ") + e.what());
  }
}

std::size_t RemoteBackend::count_tokens(std::string_view text) const {
  if (text.empty()) return 0;
  return span_to_tokens(text, ByteSpan{0, text.size()}).size();
}

std::string RemoteBackend::truncate_to_tokens(std::string_view text, std::size_t limit) const {
  if (limit == 0) throw Error(ErrorCode::InvalidArgument, "token limit must be >= 1");
  if (count_tokens(text) <= limit) return std::string(text);
  // Largest character boundary whose prefix fits; token counts are monotone
  // in prefix length.
  std::vector<std::size_t> bounds;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (utf8::is_char_boundary(text, i)) bounds.push_back(i);
  }
  std::size_t lo = 0, hi = bounds.size() - 1;  // bounds[lo] fits, bounds[hi] does not
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (count_tokens(text.substr(0, bounds[mid])) <= limit) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::string(text.substr(0, bounds[lo]));
}

}  // namespace rite
