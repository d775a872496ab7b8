#include <benchmark/benchmark.h>

#include <random>

#include "rite/eval.hpp"
#include "rite/index.hpp"
#include "rite/prompt.hpp"
#include "rite/toy_backend.hpp"

using namespace rite;

namespace {

std::vector<float> random_vec(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> g;
  std::vector<float> v(dim);
  for (auto& x : v) x = g(rng);
  return v;
}

void BM_IndexSearch(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64;
  std::mt19937_64 rng(1);
  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) entries.emplace_back("d" + std::to_string(i), EmbeddingVector(random_vec(rng, dim)));
  const auto index = VectorIndex::build(entries);
  const EmbeddingVector q(random_vec(rng, dim));
  for (auto _ : state) benchmark::DoNotOptimize(index.search(q, 10));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_IndexSearch)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_ToyForward(benchmark::State& state) {
  const auto model = ToyLM::init_from_seed(ToyLMConfig{});
  const auto tokens = byte_tokenize(std::string(static_cast<std::size_t>(state.range(0)), 'a'), 512);
  for (auto _ : state) benchmark::DoNotOptimize(model.forward_hidden(tokens));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ToyForward)->Arg(32)->Arg(128)->Arg(500);

void BM_ToyGenerate(benchmark::State& state) {
  const auto model = ToyLM::init_from_seed(ToyLMConfig{});
  const auto prompt = byte_tokenize(assemble(reasoning_template(ReasoningVariant::P3), "why is the sky blue").text, 512);
  GenConfig g;
  g.max_tokens = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(model.generate(prompt, g));
}
BENCHMARK(BM_ToyGenerate)->Arg(64)->Arg(128);

void BM_EchoEmbed(benchmark::State& state) {
  const ToyBackend backend(ToyLMConfig{});
  const auto p = assemble(echo_template(SubjectKind::Passage), "bread rises when yeast makes gas in the dough");
  const EmbedSpanRequest req{p.text, *p.second_subject_span, PoolingMode::MeanSpan};
  for (auto _ : state) benchmark::DoNotOptimize(backend.embed_span(req));
}
BENCHMARK(BM_EchoEmbed);

void BM_Ndcg(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> rel(0, 3);
  RetrievalRun run;
  Qrels qrels;
  for (int q = 0; q < 1000; ++q) {
    const std::string qid = "q" + std::to_string(q);
    std::vector<ScoredDoc> list;
    for (int d = 0; d < 100; ++d) {
      list.push_back({"d" + std::to_string(d), 1.0 - d * 0.001});
      if (d % 7 == 0) qrels.set(qid, "d" + std::to_string(d), rel(rng));
    }
    run.set(qid, list);
  }
  for (auto _ : state) benchmark::DoNotOptimize(ndcg_at_k(run, qrels, 10));
}
BENCHMARK(BM_Ndcg);

}  // namespace
BENCHMARK_MAIN();
