#include <gtest/gtest.h>

#include <atomic>
#include <json.hpp>

#include "oracles.hpp"
#include "rite/error.hpp"
#include "rite/pipeline.hpp"
#include "rite/toy_backend.hpp"
#include "rite/utf8.hpp"
#include "test_support.hpp"

using namespace rite;
using rite::testing::TempDir;

namespace {

std::shared_ptr<const ToyLM> shared_model() {
  static const auto m = std::make_shared<const ToyLM>(ToyLM::init_from_seed(ToyLMConfig{}));
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

// Toy backend that counts generate calls and can force a fixed continuation.
class ScriptedBackend final : public LmBackend {
 public:
  std::optional<std::string> reply;
  mutable std::atomic<int> generate_calls{0};
  mutable std::string last_prompt;

  BackendInfo info() const override { return toy_.info(); }
  std::string generate_text(std::string_view prompt, const GenConfig& cfg) const override {
    ++generate_calls;
    last_prompt = prompt;
    return reply ? *reply : toy_.generate_text(prompt, cfg);
  }
  EmbeddingVector embed_span(const EmbedSpanRequest& r) const override { return toy_.embed_span(r); }
  TokenRange span_to_tokens(std::string_view t, ByteSpan s) const override { return toy_.span_to_tokens(t, s); }
  std::size_t count_tokens(std::string_view t) const override { return toy_.count_tokens(t); }
  std::string truncate_to_tokens(std::string_view t, std::size_t n) const override {
    return toy_.truncate_to_tokens(t, n);
  }

 private:
  ToyBackend toy_{shared_model(), 1};
};

PipelineConfig config_with(ReasoningVariant v, int max_tokens = 64) {
  PipelineConfig c;
  c.reasoning_variant = v;
  c.reasoning_gen.max_tokens = max_tokens;
  return c;
}

}  // namespace

TEST(Methods, NamesAndRelations) {
  for (auto m : {EmbedMethod::Echo, EmbedMethod::PR, EmbedMethod::RiteEcho, EmbedMethod::RitePR}) {
    EXPECT_EQ(parse_embed_method(to_string(m)), m);
  }
  EXPECT_EQ(to_string(EmbedMethod::RiteEcho), "rite-echo");
  EXPECT_TRUE(uses_reasoning(EmbedMethod::RitePR));
  EXPECT_FALSE(uses_reasoning(EmbedMethod::PR));
  EXPECT_EQ(base_method(EmbedMethod::RiteEcho), EmbedMethod::Echo);
  EXPECT_EQ(base_method(EmbedMethod::RitePR), EmbedMethod::PR);
  EXPECT_EQ(code_of([] { parse_embed_method("hyde"); }), ErrorCode::InvalidConfig);
}

TEST(PipelineConfig, Validation) {
  PipelineConfig c;
  EXPECT_EQ(c.reasoning_variant, ReasoningVariant::P3);
  EXPECT_EQ(c.reasoning_gen.frequency_penalty, 0.3);
  EXPECT_EQ(c.reasoning_gen.temperature, 0.0);
  EXPECT_NO_THROW(c.validate());
  c.reasoning_gen.max_tokens = 100;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
  c = {};
  c.echo_pooling = PoolingMode::LastToken;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
  c = {};
  c.query_token_limit = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::InvalidConfig);
}

TEST(ReasoningCache, KeyCoversEveryGenerationInput) {
  GenConfig g;
  const auto base = gen_config_hash(g);
  EXPECT_EQ(base, gen_config_hash(GenConfig{}));
  auto changed = [&](auto mutate) {
    GenConfig h;
    mutate(h);
    return gen_config_hash(h) != base;
  };
  EXPECT_TRUE(changed([](GenConfig& h) { h.max_tokens = 64; }));
  EXPECT_TRUE(changed([](GenConfig& h) { h.frequency_penalty = 0.5; }));
  EXPECT_TRUE(changed([](GenConfig& h) { h.stop_sequences = {"\n"}; }));

  using K = ReasoningCache::Key;
  const K k{"q1", ReasoningVariant::P1, base, "m"};
  EXPECT_NE(k.str(), (K{"q1", ReasoningVariant::P2, base, "m"}.str()));
  EXPECT_NE(k.str(), (K{"q1", ReasoningVariant::P1, base, "other"}.str()));
  EXPECT_NE(k.str(), (K{"q2", ReasoningVariant::P1, base, "m"}.str()));
}

TEST(ReasoningCache, PersistsAcrossInstances) {
  const TempDir dir;
  ReasoningCache a;
  a.load(dir / "missing.jsonl");
  EXPECT_EQ(a.size(), 0u);
  const ReasoningCache::Key k{"q\"1", ReasoningVariant::P3, "h", "m"};
  a.insert(k, "line one\nline \xC3\xA9");
  a.save(dir / "c.jsonl");
  ReasoningCache b;
  b.load(dir / "c.jsonl");
  EXPECT_EQ(b.lookup(k), "line one\nline \xC3\xA9");
  rite::testing::spit(dir / "bad.jsonl", "{oops\n");
  EXPECT_EQ(code_of([&] { b.load(dir / "bad.jsonl"); }), ErrorCode::ParseError);
}

TEST(Elicitation, PromptTextAndTrimming) {
  ScriptedBackend b;
  b.reply = "  \n better query here \n";
  const EmbedPipeline p(b, config_with(ReasoningVariant::P1));
  const auto r = p.elicit_reasoning({"q", "why is the sky blue"});
  EXPECT_EQ(r.text(), "better query here");
  EXPECT_EQ(r.source(), ReasoningSource::Generated);
  EXPECT_EQ(r.variant(), ReasoningVariant::P1);
  EXPECT_EQ(b.last_prompt, rite::testing::slurp(rite::testing::fixture("prompts/reasoning_p1.txt")));
}

TEST(Elicitation, QueryIsTruncatedBeforePrompting) {
  ScriptedBackend b;
  b.reply = "r";
  auto cfg = config_with(ReasoningVariant::P2);
  cfg.query_token_limit = 4;
  const EmbedPipeline p(b, cfg);
  p.elicit_reasoning({"q", "abcdefgh"});
  EXPECT_EQ(b.last_prompt.rfind("Query: abcd. Think", 0), 0u);
}

TEST(Elicitation, CacheAvoidsRegeneration) {
  ScriptedBackend b;
  ReasoningCache cache;
  const EmbedPipeline p(b, config_with(ReasoningVariant::P2), &cache);
  const auto first = p.elicit_reasoning({"q1", "test"});
  const auto second = p.elicit_reasoning({"q1", "test"});
  EXPECT_EQ(first, second);
  EXPECT_EQ(b.generate_calls.load(), 1);
  const EmbedPipeline longer(b, config_with(ReasoningVariant::P2, 128), &cache);
  longer.elicit_reasoning({"q1", "test"});
  EXPECT_EQ(b.generate_calls.load(), 2);
  EXPECT_EQ(cache.size(), 2u);
}

TEST(Elicitation, MatchesPinnedGolden) {
  // Regression pin for seed 0, Prompt 2, query "test", 64 tokens.
  const auto golden =
      nlohmann::json::parse(rite::testing::slurp(rite::testing::fixture("golden/elicit_p2_test.json")));
  const ToyBackend b(shared_model(), 1);
  const EmbedPipeline p(b, config_with(ReasoningVariant::P2));
  const auto r = p.elicit_reasoning({"q", "test"});
  EXPECT_EQ(r.text(), golden.at("reasoning").get<std::string>());
  // Same as trimming the raw continuation of the assembled prompt.
  const auto prompt = assemble(reasoning_template(ReasoningVariant::P2), "test");
  GenConfig g;
  g.max_tokens = 64;
  EXPECT_EQ(r.text(), utf8::trim_whitespace(b.generate_text(prompt.text, g)));
}

TEST(Elicitation, EmptyReasoningPolicies) {
  ScriptedBackend b;
  b.reply = " \n\t ";
  const EmbedPipeline fallback(b, config_with(ReasoningVariant::P3));
  const Query q{"q", "why is the sky blue"};
  const auto r = fallback.elicit_reasoning(q);
  EXPECT_TRUE(r.empty());
  // Empty reasoning degrades to the base method, bitwise.
  EXPECT_EQ(fallback.embed_query(q, EmbedMethod::RiteEcho, r), fallback.embed_query(q, EmbedMethod::Echo, {}));
  EXPECT_EQ(fallback.embed_query(q, EmbedMethod::RitePR, r), fallback.embed_query(q, EmbedMethod::PR, {}));

  auto cfg = config_with(ReasoningVariant::P3);
  cfg.empty_reasoning_policy = EmptyReasoningPolicy::Error;
  const EmbedPipeline strict(b, cfg);
  EXPECT_EQ(code_of([&] { strict.elicit_reasoning(q); }), ErrorCode::EmptyReasoning);
  EXPECT_EQ(code_of([&] { strict.embed_query(q, EmbedMethod::RiteEcho, ReasoningText::provided("  ")); }),
            ErrorCode::EmptyReasoning);
}

TEST(Embedding, QueryPromptsByMethod) {
  const ToyBackend b(shared_model(), 1);
  const EmbedPipeline p(b, PipelineConfig{});
  const Query q{"q", "why is the sky blue"};
  const auto r = ReasoningText::provided(rite::testing::slurp(rite::testing::fixture("prompts/reasoning.txt")));
  EXPECT_EQ(p.query_prompt(q, EmbedMethod::RiteEcho, r).text,
            rite::testing::slurp(rite::testing::fixture("prompts/rite_echo.txt")));
  EXPECT_EQ(p.query_prompt(q, EmbedMethod::RitePR, r).text,
            rite::testing::slurp(rite::testing::fixture("prompts/rite_pr.txt")));
  EXPECT_EQ(p.query_prompt(q, EmbedMethod::Echo, {}).text,
            rite::testing::slurp(rite::testing::fixture("prompts/echo_query.txt")));
  EXPECT_EQ(p.document_prompt({"d", "why is the sky blue"}, EmbedMethod::RitePR).text,
            rite::testing::slurp(rite::testing::fixture("prompts/pr_passage.txt")));
  EXPECT_EQ(code_of([&] { p.embed_query(q, EmbedMethod::RiteEcho, {}); }), ErrorCode::MissingReasoning);
  EXPECT_EQ(code_of([&] { p.embed_query(q, EmbedMethod::Echo, r); }), ErrorCode::UnexpectedReasoning);
  EXPECT_EQ(code_of([&] { p.embed_query({"q", ""}, EmbedMethod::Echo, {}); }), ErrorCode::EmptySubject);
}

TEST(Embedding, PoolsTheRightRegion) {
  const ToyBackend b(shared_model(), 1);
  const EmbedPipeline p(b, PipelineConfig{});
  const Query q{"q", "sky"};
  const auto r = ReasoningText::provided("light scatters");

  const auto echo = p.query_prompt(q, EmbedMethod::RiteEcho, r);
  const auto want = oracle::pool_from_hidden(b.model(), echo.text, echo.text.size() - 3, echo.text.size(),
                                             oracle::Pool::Mean);
  const auto got = p.embed_query(q, EmbedMethod::RiteEcho, r);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-6);

  const auto pr = p.query_prompt(q, EmbedMethod::RitePR, r);
  const auto want_pr = oracle::pool_from_hidden(b.model(), pr.text, 0, 0, oracle::Pool::Last);
  const auto got_pr = p.embed_query(q, EmbedMethod::RitePR, r);
  for (std::size_t i = 0; i < want_pr.size(); ++i) EXPECT_NEAR(got_pr[i], want_pr[i], 1e-6);
}

TEST(Embedding, ReasoningChangesQueriesNotDocuments) {
  const ToyBackend b(shared_model(), 1);
  const EmbedPipeline p(b, PipelineConfig{});
  const Query q{"q", "how does bread rise"};
  const auto echo = p.embed_query(q, EmbedMethod::Echo, {});
  const auto rite = p.embed_query(q, EmbedMethod::RiteEcho, ReasoningText::provided("yeast makes gas"));
  float max_diff = 0;
  for (std::size_t i = 0; i < echo.dim(); ++i) max_diff = std::max(max_diff, std::abs(echo[i] - rite[i]));
  EXPECT_GT(max_diff, 1e-6f);

  const Document d{"d", "bread rises when yeast makes gas"};
  EXPECT_EQ(p.embed_document(d, EmbedMethod::Echo), p.embed_document(d, EmbedMethod::RiteEcho));
  EXPECT_EQ(p.embed_document(d, EmbedMethod::PR), p.embed_document(d, EmbedMethod::RitePR));
  EXPECT_FALSE(p.embed_document(d, EmbedMethod::Echo) == p.embed_document(d, EmbedMethod::PR));
}

TEST(ProvidedReasoning, LoadAndFormat) {
  const TempDir dir;
  const std::vector<std::pair<std::string, ReasoningText>> rows = {{"q1", ReasoningText::provided("a \"b\"")},
                                                                   {"q2", ReasoningText::provided("c\nd")}};
  rite::testing::spit(dir / "r.jsonl", format_reasoning_jsonl(rows) + "\n");
  const auto loaded = load_provided_reasoning(dir / "r.jsonl");
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded.at("q1").text(), "a \"b\"");
  EXPECT_EQ(loaded.at("q2").source(), ReasoningSource::Provided);

  rite::testing::spit(dir / "dup.jsonl", R"({"qid":"q1","reasoning":"x"})"
                                         "\n"
                                         R"({"qid":"q1","reasoning":"y"})"
                                         "\n");
  EXPECT_EQ(code_of([&] { load_provided_reasoning(dir / "dup.jsonl"); }), ErrorCode::DuplicateQueryId);
  rite::testing::spit(dir / "bad.jsonl", R"({"qid":"q1"})");
  EXPECT_EQ(code_of([&] { load_provided_reasoning(dir / "bad.jsonl"); }), ErrorCode::ParseError);
}
