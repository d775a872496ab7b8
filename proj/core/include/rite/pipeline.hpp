#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rite/backend.hpp"
#include "rite/prompt.hpp"
#include "rite/types.hpp"

namespace rite {

enum class EmbedMethod { Echo, PR, RiteEcho, RitePR };

std::string_view to_string(EmbedMethod method) noexcept;  // "echo", "pr", "rite-echo", "rite-pr"
EmbedMethod parse_embed_method(std::string_view name);

bool uses_reasoning(EmbedMethod method) noexcept;
// Echo for Echo/RiteEcho, PR for PR/RitePR. Documents always use this.
EmbedMethod base_method(EmbedMethod method) noexcept;

enum class EmptyReasoningPolicy { Fallback, Error };

struct PipelineConfig {
  ReasoningVariant reasoning_variant = ReasoningVariant::P3;
  GenConfig reasoning_gen;
  PoolingMode echo_pooling = PoolingMode::MeanSpan;
  std::size_t query_token_limit = 128;
  std::size_t passage_token_limit = 256;
  EmptyReasoningPolicy empty_reasoning_policy = EmptyReasoningPolicy::Fallback;

  // max_tokens must be one of 64/128/256, echo_pooling must be a span mode,
  // and limits must be >= 1.
  void validate() const;
};

// Stable textual hash of every generation parameter.
std::string gen_config_hash(const GenConfig& cfg);

// Reasoning cache keyed by (query id, prompt variant, generation-config
// hash, backend model name). Safe for concurrent lookup and insert.
class ReasoningCache {
 public:
  struct Key {
    std::string query_id;
    ReasoningVariant variant;
    std::string gen_hash;
    std::string model;

    std::string str() const;
  };

  std::optional<std::string> lookup(const Key& key) const;
  void insert(const Key& key, std::string text);
  std::size_t size() const;

  // JSONL persistence; load() tolerates a missing file.
  void load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::string> entries_;
};

// Provided (oracle) reasoning: one {"qid": str, "reasoning": str} per line.
std::map<std::string, ReasoningText> load_provided_reasoning(const std::filesystem::path& path);
std::string format_reasoning_jsonl(const std::vector<std::pair<std::string, ReasoningText>>& entries);

class EmbedPipeline {
 public:
  EmbedPipeline(const LmBackend& backend, PipelineConfig config, ReasoningCache* cache = nullptr);

  const PipelineConfig& config() const noexcept { return config_; }

  // Step 1. The query is truncated to query_token_limit first; the
  // generation is whitespace-trimmed. An empty result under the Fallback
  // policy yields an empty ReasoningText (logged).
  ReasoningText elicit_reasoning(const Query& query) const;

  // The prompt embed_query would send, exposed for inspection.
  AssembledPrompt query_prompt(const Query& query, EmbedMethod method,
                               const std::optional<ReasoningText>& reasoning) const;
  AssembledPrompt document_prompt(const Document& doc, EmbedMethod method) const;

  // Un-normalized query embedding. RITE methods require reasoning, base
  // methods forbid it; an empty reasoning degrades to the base method.
  EmbeddingVector embed_query(const Query& query, EmbedMethod method,
                              const std::optional<ReasoningText>& reasoning) const;

  // Passage-kind Echo/PR embedding, never with reasoning. RITE methods
  // are mapped to their base method.
  EmbeddingVector embed_document(const Document& doc, EmbedMethod method) const;

 private:
  EmbeddingVector embed_prompt(const AssembledPrompt& prompt, TemplateFamily family) const;

  const LmBackend& backend_;
  PipelineConfig config_;
  ReasoningCache* cache_;
};

// cosine(query_vec, doc_vec).
double score(const EmbeddingVector& query_vec, const EmbeddingVector& doc_vec);

}  // namespace rite
