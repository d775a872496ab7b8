#include "rite/commands.hpp"

#include <spdlog/spdlog.h>

#include <boost/crc.hpp>

#include <cstdio>
#include <cstdlib>
#include <json.hpp>
#include <mutex>

#include "parallel.hpp"
#include "rite/container.hpp"
#include "rite/index.hpp"
#include "rite/io.hpp"
#include "rite/remote_backend.hpp"
#include "rite/toy_backend.hpp"

namespace rite {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void reject_unknown_keys(const json& obj, std::initializer_list<std::string_view> allowed, const char* where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::InvalidConfig, std::string("unknown key '") + key + "' in " + where);
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_relative() && !base.empty()) ? base / path : path;
}

void require_file(const fs::path& path, const char* what) {
  if (path.empty() || !fs::exists(path)) {
    throw Error(ErrorCode::IoError, std::string(what) + " file not found: " + path.string());
  }
}

std::string_view empty_policy_name(EmptyReasoningPolicy p) {
  return p == EmptyReasoningPolicy::Fallback ? "fallback" : "error";
}

// Failures collected across a batch stage, reported together.
class FailureLog {
 public:
  void add(const std::string& id, const Error& e) {
    std::lock_guard lock(mutex_);
    if (!first_) first_ = e.code();
    ids_.push_back(id);
    spdlog::error("{}: {}", id, e.what());
  }

  void raise_if_any(const std::string& stage) const {
    if (ids_.empty()) return;
    std::string list;
    for (const auto& id : ids_) list += (list.empty() ? "" : ", ") + id;
    throw Error(*first_, stage + " failed for: " + list);
  }

 private:
  std::mutex mutex_;
  std::vector<std::string> ids_;
  std::optional<ErrorCode> first_;
};

std::size_t workers_for(const LmBackend& backend) { return std::max<std::size_t>(1, backend.max_in_flight()); }

std::map<std::string, ReasoningText> reasoning_for_queries(const RunConfig& config, const LmBackend& backend,
                                                           const std::vector<Query>& queries,
                                                           ReasonResult* stats) {
  std::map<std::string, ReasoningText> out;
  if (config.provided_reasoning) {
    auto provided = load_provided_reasoning(*config.provided_reasoning);
    for (const auto& q : queries) {
      const auto it = provided.find(q.id);
      if (it == provided.end()) {
        throw Error(ErrorCode::MissingReasoning, "no provided reasoning for query " + q.id);
      }
      out.emplace(q.id, it->second);
    }
    return out;
  }

  ReasoningCache cache;
  cache.load(config.reasoning_cache_path());
  const std::size_t before = cache.size();
  EmbedPipeline pipeline(backend, config.pipeline, &cache);

  std::vector<std::optional<ReasoningText>> results(queries.size());
  FailureLog failures;
  detail::parallel_for(queries.size(), workers_for(backend), [&](std::size_t i) {
    try {
      results[i] = pipeline.elicit_reasoning(queries[i]);
    } catch (const Error& e) {
      failures.add(queries[i].id, e);
    }
  });
  if (cache.size() != before) cache.save(config.reasoning_cache_path());
  failures.raise_if_any("reasoning elicitation");

  for (std::size_t i = 0; i < queries.size(); ++i) out.emplace(queries[i].id, *results[i]);
  if (stats) {
    stats->generated = cache.size() - before;
    stats->from_cache = queries.size() - stats->generated;
  }
  return out;
}

json backend_json(const BackendInfo& info) {
  return {{"model", info.model_name}, {"dim", info.embedding_dim}, {"max_context", info.max_context_tokens}};
}

}  // namespace

fs::path RunConfig::reasoning_cache_path() const {
  return cache_path ? *cache_path : output_dir / "reasoning_cache.jsonl";
}

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("run config: ") + e.what());
  }
  RunConfig c;
  c.output_dir = resolve(base_dir, c.output_dir.string());
  try {
    reject_unknown_keys(j, {"backend", "method", "pipeline", "corpus", "queries", "qrels", "provided_reasoning",
                            "output_dir", "cache", "top_k", "eval_k"},
                        "run config");
    if (j.contains("backend")) {
      const auto& b = j.at("backend");
      reject_unknown_keys(b, {"kind", "url", "max_in_flight", "toy"}, "backend");
      const auto kind = b.value("kind", std::string("toy"));
      if (kind == "toy") {
        c.backend.kind = BackendSpec::Kind::Toy;
      } else if (kind == "remote") {
        c.backend.kind = BackendSpec::Kind::Remote;
      } else {
        throw Error(ErrorCode::InvalidConfig, "backend.kind must be 'toy' or 'remote'");
      }
      c.backend.url = b.value("url", std::string());
      c.backend.max_in_flight = b.value("max_in_flight", c.backend.max_in_flight);
      if (b.contains("toy")) {
        const auto& t = b.at("toy");
        reject_unknown_keys(t, {"seed", "d_model", "n_layers", "n_heads", "d_ff", "max_context"}, "backend.toy");
        auto& toy = c.backend.toy;
        toy.seed = t.value("seed", toy.seed);
        toy.d_model = t.value("d_model", toy.d_model);
        toy.n_layers = t.value("n_layers", toy.n_layers);
        toy.n_heads = t.value("n_heads", toy.n_heads);
        toy.d_ff = t.value("d_ff", toy.d_ff);
        toy.max_context = t.value("max_context", toy.max_context);
      }
    }
    if (j.contains("method")) c.method = parse_embed_method(j.at("method").get<std::string>());
    if (j.contains("pipeline")) {
      const auto& p = j.at("pipeline");
      reject_unknown_keys(p, {"reasoning_variant", "max_tokens", "temperature", "frequency_penalty", "stop",
                              "echo_pooling", "query_token_limit", "passage_token_limit", "empty_reasoning"},
                          "pipeline");
      auto& pc = c.pipeline;
      if (p.contains("reasoning_variant")) {
        pc.reasoning_variant = parse_reasoning_variant(p.at("reasoning_variant").get<std::string>());
      }
      pc.reasoning_gen.max_tokens = p.value("max_tokens", pc.reasoning_gen.max_tokens);
      pc.reasoning_gen.temperature = p.value("temperature", pc.reasoning_gen.temperature);
      pc.reasoning_gen.frequency_penalty = p.value("frequency_penalty", pc.reasoning_gen.frequency_penalty);
      pc.reasoning_gen.stop_sequences = p.value("stop", pc.reasoning_gen.stop_sequences);
      if (p.contains("echo_pooling")) pc.echo_pooling = parse_pooling_mode(p.at("echo_pooling").get<std::string>());
      pc.query_token_limit = p.value("query_token_limit", pc.query_token_limit);
      pc.passage_token_limit = p.value("passage_token_limit", pc.passage_token_limit);
      if (p.contains("empty_reasoning")) {
        const auto policy = p.at("empty_reasoning").get<std::string>();
        if (policy == "fallback") {
          pc.empty_reasoning_policy = EmptyReasoningPolicy::Fallback;
        } else if (policy == "error") {
          pc.empty_reasoning_policy = EmptyReasoningPolicy::Error;
        } else {
          throw Error(ErrorCode::InvalidConfig, "pipeline.empty_reasoning must be 'fallback' or 'error'");
        }
      }
    }
    if (j.contains("corpus")) c.corpus = resolve(base_dir, j.at("corpus").get<std::string>());
    if (j.contains("queries")) c.queries = resolve(base_dir, j.at("queries").get<std::string>());
    if (j.contains("qrels")) c.qrels = resolve(base_dir, j.at("qrels").get<std::string>());
    if (j.contains("provided_reasoning") && !j.at("provided_reasoning").is_null()) {
      c.provided_reasoning = resolve(base_dir, j.at("provided_reasoning").get<std::string>());
    }
    if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    if (j.contains("cache") && !j.at("cache").is_null()) c.cache_path = resolve(base_dir, j.at("cache").get<std::string>());
    c.top_k = j.value("top_k", c.top_k);
    c.eval_k = j.value("eval_k", c.eval_k);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("run config: ") + e.what());
  }
  if (c.top_k == 0 || c.eval_k == 0) throw Error(ErrorCode::InvalidConfig, "top_k and eval_k must be >= 1");
  c.pipeline.validate();
  if (c.backend.kind == BackendSpec::Kind::Toy) c.backend.toy.validate();
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  return parse_run_config(read_file(path), path.parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  const auto& g = c.pipeline.reasoning_gen;
  json j = {
      {"backend",
       {{"kind", c.backend.kind == BackendSpec::Kind::Toy ? "toy" : "remote"},
        {"url", c.backend.url},
        {"max_in_flight", c.backend.max_in_flight},
        {"toy",
         {{"seed", c.backend.toy.seed},
          {"d_model", c.backend.toy.d_model},
          {"n_layers", c.backend.toy.n_layers},
          {"n_heads", c.backend.toy.n_heads},
          {"d_ff", c.backend.toy.d_ff},
          {"max_context", c.backend.toy.max_context}}}}},
      {"method", std::string(to_string(c.method))},
      {"pipeline",
       {{"reasoning_variant", std::string(to_string(c.pipeline.reasoning_variant))},
        {"max_tokens", g.max_tokens},
        {"temperature", g.temperature},
        {"frequency_penalty", g.frequency_penalty},
        {"stop", g.stop_sequences},
        {"echo_pooling", std::string(to_string(c.pipeline.echo_pooling))},
        {"query_token_limit", c.pipeline.query_token_limit},
        {"passage_token_limit", c.pipeline.passage_token_limit},
        {"empty_reasoning", std::string(empty_policy_name(c.pipeline.empty_reasoning_policy))}}},
      {"corpus", c.corpus.string()},
      {"queries", c.queries.string()},
      {"qrels", c.qrels.string()},
      {"provided_reasoning", c.provided_reasoning ? json(c.provided_reasoning->string()) : json(nullptr)},
      {"output_dir", c.output_dir.string()},
      {"cache", c.cache_path ? json(c.cache_path->string()) : json(nullptr)},
      {"top_k", c.top_k},
      {"eval_k", c.eval_k}};
  return j.dump(2) + "\n";
}

void apply_env_overrides(RunConfig& config) {
  if (const char* url = std::getenv("RITE_BACKEND_URL"); url && *url) {
    config.backend.kind = BackendSpec::Kind::Remote;
    config.backend.url = url;
  }
}

std::unique_ptr<LmBackend> make_backend(const BackendSpec& spec) {
  if (spec.kind == BackendSpec::Kind::Remote) {
    RemoteOptions opts;
    opts.url = spec.url;
    opts.max_in_flight = spec.max_in_flight;
    return std::make_unique<RemoteBackend>(std::move(opts));
  }
  return std::make_unique<ToyBackend>(spec.toy);
}

namespace artifacts {
fs::path reasoning(const RunConfig& c) { return c.output_dir / "reasoning.jsonl"; }
fs::path index(const RunConfig& c) {
  return c.output_dir / ("corpus." + std::string(to_string(base_method(c.method))) + ".idx");
}
fs::path query_vectors(const RunConfig& c) {
  return c.output_dir / ("queries." + std::string(to_string(c.method)) + ".vec");
}
fs::path run(const RunConfig& c) { return c.output_dir / ("run." + std::string(to_string(c.method)) + ".trec"); }
fs::path eval(const RunConfig& c) { return c.output_dir / ("eval." + std::string(to_string(c.method)) + ".json"); }
fs::path manifest(const RunConfig& c) { return c.output_dir / "manifest.json"; }
}  // namespace artifacts

ReasonResult cmd_reason(const RunConfig& config, const LmBackend& backend) {
  require_file(config.queries, "queries");
  const auto queries = load_queries(config.queries);
  ReasonResult result;
  result.file = artifacts::reasoning(config);
  const auto reasoning = reasoning_for_queries(config, backend, queries, &result);
  std::vector<std::pair<std::string, ReasoningText>> rows;
  rows.reserve(queries.size());
  for (const auto& q : queries) rows.emplace_back(q.id, reasoning.at(q.id));
  write_file_atomic(result.file, format_reasoning_jsonl(rows));
  spdlog::info("reasoning: {} queries ({} generated, {} cached) -> {}", queries.size(), result.generated,
               result.from_cache, result.file.string());
  return result;
}

fs::path cmd_embed_corpus(const RunConfig& config, const LmBackend& backend) {
  require_file(config.corpus, "corpus");
  const auto docs = load_corpus(config.corpus);
  EmbedPipeline pipeline(backend, config.pipeline);
  const EmbedMethod doc_method = base_method(config.method);

  std::vector<std::optional<EmbeddingVector>> vectors(docs.size());
  FailureLog failures;
  detail::parallel_for(docs.size(), workers_for(backend), [&](std::size_t i) {
    try {
      vectors[i] = pipeline.embed_document(docs[i], doc_method);
    } catch (const Error& e) {
      failures.add(docs[i].id, e);
    }
  });
  failures.raise_if_any("document embedding");

  std::vector<std::pair<std::string, EmbeddingVector>> entries;
  entries.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) entries.emplace_back(docs[i].id, std::move(*vectors[i]));
  const auto index = VectorIndex::build(entries);
  const auto path = artifacts::index(config);
  index.save(path);
  spdlog::info("corpus: {} documents embedded with {} -> {}", docs.size(), to_string(doc_method), path.string());
  return path;
}

fs::path cmd_retrieve(const RunConfig& config, const LmBackend& backend) {
  require_file(config.queries, "queries");
  const auto index_path = artifacts::index(config);
  require_file(index_path, "index");
  const auto queries = load_queries(config.queries);
  const auto index = VectorIndex::load(index_path);

  std::map<std::string, ReasoningText> reasoning;
  if (uses_reasoning(config.method)) reasoning = reasoning_for_queries(config, backend, queries, nullptr);

  EmbedPipeline pipeline(backend, config.pipeline);
  std::vector<std::optional<EmbeddingVector>> vectors(queries.size());
  FailureLog failures;
  detail::parallel_for(queries.size(), workers_for(backend), [&](std::size_t i) {
    const auto& q = queries[i];
    try {
      std::optional<ReasoningText> r;
      if (uses_reasoning(config.method)) r = reasoning.at(q.id);
      vectors[i] = pipeline.embed_query(q, config.method, r);
    } catch (const Error& e) {
      failures.add(q.id, e);
    }
  });
  failures.raise_if_any("query embedding");

  VectorContainer qv;
  qv.role = ContainerRole::Index;
  qv.dim = queries.empty() ? 0 : static_cast<std::uint32_t>(vectors.front()->dim());
  RetrievalRun run;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    qv.ids.push_back(queries[i].id);
    qv.values.insert(qv.values.end(), vectors[i]->values().begin(), vectors[i]->values().end());
    run.set(queries[i].id, index.search(*vectors[i], config.top_k));
  }
  write_container(artifacts::query_vectors(config), qv);

  const auto path = artifacts::run(config);
  write_file_atomic(path, format_trec_run(run, to_string(config.method)));
  spdlog::info("retrieve: {} queries, top {} -> {}", queries.size(), config.top_k, path.string());
  return path;
}

EvalOutcome cmd_eval(const fs::path& run_file, const fs::path& qrels_file, std::size_t k,
                     const std::optional<fs::path>& out_json) {
  require_file(run_file, "run");
  require_file(qrels_file, "qrels");
  const auto run = load_trec_run(run_file);
  const auto qrels = load_qrels(qrels_file);
  EvalOutcome out;
  out.report = ndcg_at_k(run, qrels, k);
  out.table = compare_runs({{run_file.stem().string(), out.report}}).render_text();
  if (out_json) write_file_atomic(*out_json, out.report.to_json());
  return out;
}

RunResult cmd_run(const RunConfig& config, const LmBackend& backend) {
  require_file(config.corpus, "corpus");
  require_file(config.queries, "queries");
  require_file(config.qrels, "qrels");
  if (config.provided_reasoning) require_file(*config.provided_reasoning, "provided reasoning");
  if (config.provided_reasoning && !uses_reasoning(config.method)) {
    throw Error(ErrorCode::InvalidConfig, "provided reasoning requires a RITE method");
  }

  json files = json::object();
  auto record = [&](const char* name, const fs::path& path) {
    // CRC-32 rather than CRC-64: containers end with their own CRC-64, so
    // a whole-file CRC-64 is the same residue for every container.
    const auto bytes = read_file(path);
    boost::crc_32_type crc;
    crc.process_bytes(bytes.data(), bytes.size());
    files[name] = {{"file", fs::relative(path, config.output_dir).generic_string()},
                   {"bytes", bytes.size()},
                   {"crc32", crc.checksum()}};
  };

  if (uses_reasoning(config.method)) {
    if (config.provided_reasoning) {
      spdlog::info("oracle mode: using provided reasoning from {}", config.provided_reasoning->string());
    } else {
      record("reasoning", cmd_reason(config, backend).file);
    }
  }
  record("index", cmd_embed_corpus(config, backend));
  const auto run_path = cmd_retrieve(config, backend);
  record("query_vectors", artifacts::query_vectors(config));
  record("run", run_path);
  const auto eval = cmd_eval(run_path, config.qrels, config.eval_k, artifacts::eval(config));
  record("eval", artifacts::eval(config));

  // Hash the content-bearing config; output locations do not change results.
  json canon = json::parse(run_config_to_json(config));
  canon.erase("output_dir");
  canon.erase("cache");
  canon["corpus"] = hex64(crc64(read_file(config.corpus)));
  canon["queries"] = hex64(crc64(read_file(config.queries)));
  canon["qrels"] = hex64(crc64(read_file(config.qrels)));
  if (config.provided_reasoning) canon["provided_reasoning"] = hex64(crc64(read_file(*config.provided_reasoning)));
  if (config.backend.kind == BackendSpec::Kind::Toy) canon["backend"].erase("url");

  const json manifest = {{"config_hash", hex64(crc64(canon.dump()))},
                         {"config", canon},
                         {"method", std::string(to_string(config.method))},
                         {"reasoning_source", !uses_reasoning(config.method) ? "none"
                                              : config.provided_reasoning     ? "provided"
                                                                              : "generated"},
                         {"backend", backend_json(backend.info())},
                         {"artifacts", files},
                         {"ndcg", {{"k", eval.report.k}, {"mean", eval.report.mean}}}};
  RunResult result{eval.report, artifacts::manifest(config)};
  write_file_atomic(result.manifest, manifest.dump(2) + "\n");
  spdlog::info("run: {} nDCG@{} = {:.4f}", to_string(config.method), eval.report.k, eval.report.mean);
  return result;
}

RunComparison cmd_sweep(const RunConfig& config, const LmBackend& backend) {
  if (!uses_reasoning(config.method)) {
    throw Error(ErrorCode::InvalidConfig, "sweep needs a RITE method (rite-echo or rite-pr)");
  }
  if (config.provided_reasoning) {
    throw Error(ErrorCode::InvalidConfig, "sweep varies generated reasoning; provided reasoning has no max_tokens");
  }
  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const int mt : {64, 128, 256}) {
    RunConfig sub = config;
    const std::string name = "mt" + std::to_string(mt);
    sub.pipeline.reasoning_gen.max_tokens = mt;
    sub.output_dir = config.output_dir / name;
    sub.cache_path = config.reasoning_cache_path();
    reports.emplace_back(name, cmd_run(sub, backend).report);
  }
  auto cmp = compare_runs(reports);
  write_file_atomic(config.output_dir / "sweep.json", cmp.to_json());
  write_file_atomic(config.output_dir / "sweep.txt", cmp.render_text());
  return cmp;
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::ProtocolError:
    case ErrorCode::ContextOverflow:
    case ErrorCode::EmptySpanCoverage:
    case ErrorCode::UnsupportedTemperature:
      return 2;
    case ErrorCode::InvariantViolation:
      return 3;
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptySubject:
    case ErrorCode::MissingReasoning:
    case ErrorCode::UnexpectedReasoning:
    case ErrorCode::EmptyReasoning:
    case ErrorCode::InvalidConfig:
    case ErrorCode::ParseError:
    case ErrorCode::DuplicateId:
    case ErrorCode::DuplicateQueryId:
    case ErrorCode::NegativeRelevance:
    case ErrorCode::KMismatch:
    case ErrorCode::IoError:
    case ErrorCode::FormatError:
    case ErrorCode::ChecksumError:
    case ErrorCode::ZeroVector:
    case ErrorCode::DimMismatch:
      return 1;
  }
  return 3;
}

}  // namespace rite
