#include "rite/wire_server.hpp"

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "rite/error.hpp"
#include "wire_protocol.hpp"

namespace rite {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", std::string(code)}, {"message", message}}}}.dump(),
                  "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_error(res, wire::status_for(e.code()), to_string(e.code()), e.what());
}

json parse_body(const httplib::Request& req) {
  try {
    json body = json::parse(req.body);
    if (!body.is_object()) throw Error(ErrorCode::ParseError, "request body must be a JSON object");
    return body;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("malformed JSON: ") + e.what());
  }
}

template <typename T>
T field(const json& body, const char* name) {
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ParseError, std::string("missing or mistyped field '") + name + "'");
  }
}

template <typename T>
T field_or(const json& body, const char* name, T fallback) {
  return body.contains(name) ? field<T>(body, name) : fallback;
}

}  // namespace

struct WireServer::Impl {
  std::shared_ptr<const LmBackend> backend;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  explicit Impl(std::shared_ptr<const LmBackend> b) : backend(std::move(b)) { install_routes(); }

  template <typename Handler>
  static void guarded(httplib::Response& res, Handler&& handler) {
    try {
      handler();
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const std::exception& e) {
      send_error(res, 500, "InternalError", e.what());
    }
  }

  void install_routes() {
    server.Get(wire::kInfoPath, [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        const auto info = backend->info();
        res.set_content(json{{"model", info.model_name},
                             {"dim", info.embedding_dim},
                             {"max_context", info.max_context_tokens}}
                            .dump(),
                        "application/json");
      });
    });

    server.Post(wire::kGeneratePath, [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        GenConfig cfg;
        const auto prompt = field<std::string>(body, "prompt");
        cfg.max_tokens = field<int>(body, "max_tokens");
        cfg.temperature = field_or<double>(body, "temperature", 0.0);
        cfg.frequency_penalty = field_or<double>(body, "frequency_penalty", cfg.frequency_penalty);
        cfg.n_choices = field_or<int>(body, "n", 1);
        cfg.stop_sequences = field_or<std::vector<std::string>>(body, "stop", {});
        if (cfg.temperature != 0.0) {
          throw Error(ErrorCode::UnsupportedTemperature, "temperature must be 0");
        }
        if (cfg.n_choices != 1) {
          send_error(res, 422, to_string(ErrorCode::InvalidConfig), "n must be 1");
          return;
        }
        const std::string text = backend->generate_text(prompt, cfg);
        res.set_content(json{{"choices", json::array({json{{"text", text}}})},
                             {"usage",
                              {{"prompt_tokens", backend->count_tokens(prompt)},
                               {"completion_tokens", backend->count_tokens(text)}}}}
                            .dump(),
                        "application/json");
      });
    });

    server.Post(wire::kEmbedSpanPath, [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        EmbedSpanRequest r;
        r.text = field<std::string>(body, "text");
        r.pooling = parse_pooling_mode(field<std::string>(body, "pooling"));
        if (r.pooling != PoolingMode::LastToken || body.contains("span")) {
          const auto span = body.contains("span") ? body.at("span") : json::object();
          r.span = ByteSpan{field<std::size_t>(span, "start"), field<std::size_t>(span, "end")};
        }
        validate_span_request(r);

        TokenRange tokens;
        if (r.pooling == PoolingMode::LastToken) {
          if (r.text.empty()) {
            tokens = {0, 1};
          } else {
            const auto all = backend->span_to_tokens(r.text, ByteSpan{0, r.text.size()});
            tokens = {all.end - 1, all.end};
          }
        } else {
          tokens = backend->span_to_tokens(r.text, r.span);
        }
        const auto vec = backend->embed_span(r);
        res.set_content(json{{"embedding", std::vector<float>(vec.values().begin(), vec.values().end())},
                             {"dim", vec.dim()},
                             {"token_span", {{"start", tokens.start}, {"end", tokens.end}}}}
                            .dump(),
                        "application/json");
      });
    });
  }
};

WireServer::WireServer(std::shared_ptr<const LmBackend> backend)
    : impl_(std::make_unique<Impl>(std::move(backend))) {}

WireServer::~WireServer() { stop(); }

int WireServer::start(const std::string& host, int port) {
  impl_->port = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (impl_->port < 0) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->port;
}

void WireServer::run(const std::string& host, int port) {
  impl_->port = port;
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void WireServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int WireServer::port() const noexcept { return impl_->port; }

}  // namespace rite
