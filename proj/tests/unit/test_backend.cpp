#include <gtest/gtest.h>

#include <httplib.h>

#include <future>
#include <json.hpp>

#include "oracles.hpp"
#include "rite/error.hpp"
#include "rite/remote_backend.hpp"
#include "rite/toy_backend.hpp"
#include "rite/wire_server.hpp"
#include "test_support.hpp"

using namespace rite;
using nlohmann::json;

namespace {

std::shared_ptr<const ToyLM> shared_model() {
  static const auto m = std::make_shared<const ToyLM>(ToyLM::init_from_seed(ToyLMConfig{.max_context = 128}));
  return m;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorCode::InvariantViolation;
}

EmbeddingVector embed(const LmBackend& b, std::string text, std::size_t s, std::size_t e,
                      PoolingMode mode = PoolingMode::MeanSpan) {
  return b.embed_span(EmbedSpanRequest{std::move(text), ByteSpan{s, e}, mode});
}

void expect_close(const EmbeddingVector& a, const EmbeddingVector& b, double tol) {
  ASSERT_EQ(a.dim(), b.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "coordinate " << i;
}

// Serves the toy model on a loopback port for the lifetime of the fixture.
struct LoopbackPeer {
  std::shared_ptr<ToyBackend> local = std::make_shared<ToyBackend>(shared_model(), 4);
  WireServer server{local};
  int port = server.start();
  RemoteBackend remote{RemoteOptions{"http://127.0.0.1:" + std::to_string(port), 4}};
};

LoopbackPeer& peer() {
  static LoopbackPeer p;
  return p;
}

// Delegates to the toy backend but reports failures chosen by the test.
class FaultyBackend final : public LmBackend {
 public:
  explicit FaultyBackend(ErrorCode code) : code_(code) {}
  BackendInfo info() const override { return inner_.info(); }
  std::string generate_text(std::string_view, const GenConfig&) const override { throw Error(code_, "injected"); }
  EmbeddingVector embed_span(const EmbedSpanRequest&) const override { throw Error(code_, "injected"); }
  TokenRange span_to_tokens(std::string_view, ByteSpan) const override { throw Error(code_, "injected"); }
  std::size_t count_tokens(std::string_view t) const override { return inner_.count_tokens(t); }
  std::string truncate_to_tokens(std::string_view t, std::size_t n) const override {
    return inner_.truncate_to_tokens(t, n);
  }

 private:
  ErrorCode code_;
  ToyBackend inner_{shared_model(), 1};
};

}  // namespace

// Black-box contract, run against the in-process toy backend and the remote
// client talking to the same model over HTTP.
class BackendContract : public ::testing::TestWithParam<std::string> {
 protected:
  const LmBackend& backend() const {
    if (GetParam() == "toy") return *peer().local;
    return peer().remote;
  }
};

INSTANTIATE_TEST_SUITE_P(Peers, BackendContract, ::testing::Values("toy", "remote"));

TEST_P(BackendContract, InfoIsStableAndMatchesDim) {
  const auto a = backend().info();
  EXPECT_EQ(a, backend().info());
  EXPECT_EQ(a.embedding_dim, 64u);
  EXPECT_EQ(a.max_context_tokens, 128u);
  EXPECT_EQ(a.model_name, "toy-lm/d64-l2-h4/seed=0");
  EXPECT_EQ(embed(backend(), "abc", 0, 3).dim(), a.embedding_dim);
  EXPECT_EQ(embed(backend(), "abc", 0, 0, PoolingMode::LastToken).dim(), a.embedding_dim);
}

TEST_P(BackendContract, GreedyDecodeIsDeterministic) {
  GenConfig g;
  g.max_tokens = 12;
  const auto a = backend().generate_text("Query: test.", g);
  EXPECT_EQ(a, backend().generate_text("Query: test.", g));
  EXPECT_EQ(a, peer().local->generate_text("Query: test.", g));
  g.max_tokens = 1;
  const auto one = backend().generate_text("Query: test.", g);
  EXPECT_LE(one.size(), 3u);  // one byte, possibly replaced by U+FFFD
}

TEST_P(BackendContract, LastTokenEqualsFinalByteSpan) {
  const std::string t = "last token probe";
  expect_close(embed(backend(), t, 0, 0, PoolingMode::LastToken), embed(backend(), t, t.size() - 1, t.size()), 0);
}

TEST_P(BackendContract, SingleByteSpansAverageToWholeSpan) {
  const std::string t = "pooling consistency";
  const auto whole = embed(backend(), t, 3, 11);
  std::vector<double> acc(whole.dim(), 0.0);
  for (std::size_t i = 3; i < 11; ++i) {
    const auto one = embed(backend(), t, i, i + 1);
    for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += one[c] / 8.0;
  }
  for (std::size_t c = 0; c < acc.size(); ++c) EXPECT_NEAR(whole[c], acc[c], 1e-6);
}

TEST_P(BackendContract, SpanMappingIsMonotoneAndIdempotent) {
  const std::string t = "na\xC3\xAFve caf\xC3\xA9 text";
  const auto small = backend().span_to_tokens(t, {2, 4});
  EXPECT_EQ(small, backend().span_to_tokens(t, {2, 4}));
  const auto big = backend().span_to_tokens(t, {0, t.size()});
  EXPECT_GE(big.size(), small.size());
  EXPECT_LE(big.start, small.start);
  EXPECT_GE(big.end, small.end);
}

TEST_P(BackendContract, TokenCountingAndTruncation) {
  const std::string t = "ab\xE2\x82\xAC" "cd";
  EXPECT_EQ(backend().count_tokens(t), 7u);
  EXPECT_EQ(backend().truncate_to_tokens(t, 3), "ab");  // never splits the euro sign
  EXPECT_EQ(backend().truncate_to_tokens(t, 5), "ab\xE2\x82\xAC");
  EXPECT_EQ(backend().truncate_to_tokens(t, 50), t);
}

TEST_P(BackendContract, ErrorCodes) {
  const auto& b = backend();
  EXPECT_EQ(code_of([&] { embed(b, "abc", 2, 1); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { embed(b, "abc", 1, 9); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { embed(b, "\xC3\xA9x", 1, 3); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([&] { embed(b, std::string(200, 'a'), 0, 1); }), ErrorCode::ContextOverflow);
  GenConfig g;
  g.temperature = 0.7;
  EXPECT_EQ(code_of([&] { b.generate_text("x", g); }), ErrorCode::UnsupportedTemperature);
  g = {};
  g.max_tokens = 128;
  EXPECT_EQ(code_of([&] { b.generate_text("xyz", g); }), ErrorCode::ContextOverflow);
}

TEST_P(BackendContract, ConcurrentCallsAgree) {
  std::vector<std::future<EmbeddingVector>> futures;
  for (int i = 0; i < 8; ++i) {
    futures.push_back(std::async(std::launch::async, [&, i] {
      return embed(backend(), "concurrent " + std::to_string(i), 0, 5);
    }));
  }
  for (int i = 0; i < 8; ++i) {
    EXPECT_EQ(futures[i].get(), embed(*peer().local, "concurrent " + std::to_string(i), 0, 5));
  }
}

TEST(ToyBackend, PoolingMatchesForwardHiddenOracle) {
  const ToyBackend b(shared_model(), 1);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 60; ++i) {
    const auto text = rite::testing::random_text(rng, 1, 30);
    std::vector<std::size_t> bounds;
    for (std::size_t o = 0; o <= text.size(); ++o) {
      if (oracle::on_char_boundary(text, o)) bounds.push_back(o);
    }
    std::uniform_int_distribution<std::size_t> pick(0, bounds.size() - 2);
    std::size_t a = pick(rng), c = pick(rng);
    if (a > c) std::swap(a, c);
    const std::size_t s = bounds[a], e = bounds[c + 1];
    const std::pair<PoolingMode, oracle::Pool> modes[] = {{PoolingMode::MeanSpan, oracle::Pool::Mean},
                                                          {PoolingMode::MeanSpanShifted, oracle::Pool::Shifted},
                                                          {PoolingMode::LastToken, oracle::Pool::Last}};
    for (const auto& [mode, pool] : modes) {
      const auto got = embed(b, text, s, e, mode);
      const auto want = oracle::pool_from_hidden(b.model(), text, s, e, pool);
      for (std::size_t k = 0; k < want.size(); ++k) ASSERT_NEAR(got[k], want[k], 1e-6);
    }
  }
}

TEST(ToyBackend, SpanToTokensUsesByteOffsets) {
  const ToyBackend b(shared_model(), 1);
  EXPECT_EQ(b.span_to_tokens("abcdef", {2, 4}), (TokenRange{3, 5}));
  EXPECT_EQ(code_of([&] { b.span_to_tokens("abc", {1, 1}); }), ErrorCode::EmptySpanCoverage);
}

TEST(WireServer, RawStatusCodes) {
  httplib::Client cli("127.0.0.1", peer().port);
  auto post = [&](const char* path, const std::string& body) { return cli.Post(path, body, "application/json"); };

  auto info = cli.Get("/v1/info");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->status, 200);
  EXPECT_EQ(json::parse(info->body).at("dim"), 64);

  auto ok = post("/v1/embed_span", R"({"text":"hello","span":{"start":1,"end":3},"pooling":"mean_span"})");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  const auto body = json::parse(ok->body);
  EXPECT_EQ(body.at("dim"), 64);
  EXPECT_EQ(body.at("embedding").size(), 64u);
  EXPECT_EQ(body.at("token_span"), (json{{"start", 2}, {"end", 4}}));

  auto last = post("/v1/embed_span", R"({"text":"hello","pooling":"last_token"})");
  EXPECT_EQ(last->status, 200);
  EXPECT_EQ(json::parse(last->body).at("token_span"), (json{{"start", 5}, {"end", 6}}));

  EXPECT_EQ(post("/v1/embed_span", "{not json")->status, 400);
  EXPECT_EQ(post("/v1/embed_span", R"({"text":"hello","span":{"start":3,"end":1},"pooling":"mean_span"})")->status,
            400);
  EXPECT_EQ(post("/v1/embed_span", R"({"text":"hello","span":{"start":0,"end":1},"pooling":"max"})")->status, 400);
  EXPECT_EQ(post("/v1/embed_span",
                 json{{"text", std::string(300, 'a')}, {"span", {{"start", 0}, {"end", 1}}}, {"pooling", "mean_span"}}
                     .dump())
                ->status,
            413);

  auto gen = post("/v1/generate", R"({"prompt":"hi","max_tokens":4,"temperature":0,"frequency_penalty":0.3,"n":1})");
  ASSERT_EQ(gen->status, 200);
  const auto g = json::parse(gen->body);
  EXPECT_TRUE(g.at("choices").at(0).at("text").is_string());
  EXPECT_EQ(g.at("usage").at("prompt_tokens"), 2);
  EXPECT_EQ(post("/v1/generate", R"({"prompt":"hi","max_tokens":4,"temperature":0.7})")->status, 422);
  EXPECT_EQ(post("/v1/generate", R"({"prompt":"hi","max_tokens":4,"n":2})")->status, 422);
  EXPECT_EQ(post("/v1/generate", R"({"max_tokens":4})")->status, 400);
  EXPECT_EQ(post("/v1/generate", R"({"prompt":"hi","max_tokens":200})")->status, 413);
}

TEST(WireServer, InjectedFailuresMapBothWays) {
  const std::pair<ErrorCode, int> cases[] = {{ErrorCode::EmptySpanCoverage, 404},
                                             {ErrorCode::BackendUnavailable, 503},
                                             {ErrorCode::ContextOverflow, 413}};
  for (const auto& [code, status] : cases) {
    WireServer server(std::make_shared<FaultyBackend>(code));
    const int port = server.start();
    httplib::Client cli("127.0.0.1", port);
    auto res = cli.Post("/v1/embed_span", R"({"text":"abc","span":{"start":0,"end":1},"pooling":"mean_span"})",
                        "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, status);
    EXPECT_EQ(json::parse(res->body).at("error").at("code"), std::string(to_string(code)));

    RemoteBackend remote(RemoteOptions{"http://127.0.0.1:" + std::to_string(port), 1});
    EXPECT_EQ(code_of([&] { embed(remote, "abc", 0, 1); }), code);
    EXPECT_EQ(code_of([&] { remote.generate_text("abc", GenConfig{}); }), code);
  }
}

TEST(RemoteBackend, ServerDownIsBackendUnavailable) {
  int port;
  {
    WireServer s(peer().local);
    port = s.start();
  }
  RemoteBackend remote(RemoteOptions{"http://127.0.0.1:" + std::to_string(port), 1, std::chrono::milliseconds(500)});
  EXPECT_EQ(code_of([&] { remote.info(); }), ErrorCode::BackendUnavailable);
  EXPECT_EQ(code_of([&] { remote.generate_text("x", GenConfig{}); }), ErrorCode::BackendUnavailable);
}

TEST(RemoteBackend, RejectsBadUrl) {
  EXPECT_EQ(code_of([] { RemoteBackend(RemoteOptions{"ftp://nowhere", 1}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { RemoteBackend(RemoteOptions{"", 1}); }), ErrorCode::InvalidConfig);
}

TEST(Backend, PoolingModeNames) {
  for (auto m : {PoolingMode::MeanSpan, PoolingMode::MeanSpanShifted, PoolingMode::LastToken}) {
    EXPECT_EQ(parse_pooling_mode(to_string(m)), m);
  }
  EXPECT_EQ(to_string(PoolingMode::MeanSpanShifted), "mean_span_shifted");
  EXPECT_EQ(code_of([] { parse_pooling_mode("mean"); }), ErrorCode::InvalidArgument);
}
