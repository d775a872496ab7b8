#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "rite/backend.hpp"
#include "rite/error.hpp"
#include "rite/eval.hpp"
#include "rite/pipeline.hpp"
#include "rite/toy_lm.hpp"

namespace rite {

struct BackendSpec {
  enum class Kind { Toy, Remote };

  Kind kind = Kind::Toy;
  std::string url;                 // Remote only
  std::size_t max_in_flight = 4;   // Remote only
  ToyLMConfig toy;                 // Toy only
};

struct RunConfig {
  BackendSpec backend;
  EmbedMethod method = EmbedMethod::RiteEcho;
  PipelineConfig pipeline;
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path qrels;
  std::optional<std::filesystem::path> provided_reasoning;
  std::filesystem::path output_dir = "rite-out";
  std::optional<std::filesystem::path> cache_path;  // default: output_dir/reasoning_cache.jsonl
  std::size_t top_k = 10;
  std::size_t eval_k = 10;

  std::filesystem::path reasoning_cache_path() const;
};

// Parses the JSON run configuration. Unknown keys are rejected; relative
// dataset and output paths are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

// RITE_BACKEND_URL, when set, switches the backend to Remote at that URL.
void apply_env_overrides(RunConfig& config);

std::unique_ptr<LmBackend> make_backend(const BackendSpec& spec);

// Artifact locations inside output_dir.
namespace artifacts {
std::filesystem::path reasoning(const RunConfig& c);       // reasoning.jsonl
std::filesystem::path index(const RunConfig& c);           // corpus.<echo|pr>.idx
std::filesystem::path query_vectors(const RunConfig& c);   // queries.<method>.vec
std::filesystem::path run(const RunConfig& c);             // run.<method>.trec
std::filesystem::path eval(const RunConfig& c);            // eval.<method>.json
std::filesystem::path manifest(const RunConfig& c);        // manifest.json
}  // namespace artifacts

struct ReasonResult {
  std::filesystem::path file;
  std::size_t generated = 0;
  std::size_t from_cache = 0;
};

// Elicits reasoning for every query (through the on-disk cache) and writes
// the reasoning JSONL.
ReasonResult cmd_reason(const RunConfig& config, const LmBackend& backend);

// Embeds the corpus with the base method of config.method and saves the index.
std::filesystem::path cmd_embed_corpus(const RunConfig& config, const LmBackend& backend);

// Embeds every query (eliciting or loading reasoning as needed), searches
// the saved index, and writes a TREC run tagged with the method name.
std::filesystem::path cmd_retrieve(const RunConfig& config, const LmBackend& backend);

struct EvalOutcome {
  EvalReport report;
  std::string table;
};

// Scores a TREC run against qrels; writes the report JSON when out_json is set.
EvalOutcome cmd_eval(const std::filesystem::path& run_file, const std::filesystem::path& qrels_file,
                     std::size_t k, const std::optional<std::filesystem::path>& out_json = std::nullopt);

struct RunResult {
  EvalReport report;
  std::filesystem::path manifest;
};

// reason -> embed corpus -> embed queries + retrieve -> eval, then a
// manifest with the config hash, backend info, and artifact checksums.
RunResult cmd_run(const RunConfig& config, const LmBackend& backend);

// Three cmd_run passes at reasoning max_tokens 64/128/256 (runs "mt64",
// "mt128", "mt256") sharing one reasoning cache. Reports all three.
RunComparison cmd_sweep(const RunConfig& config, const LmBackend& backend);

// 1 input error, 2 backend error, 3 internal invariant violation.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace rite
