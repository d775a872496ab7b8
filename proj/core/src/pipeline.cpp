#include "rite/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "rite/container.hpp"
#include "rite/error.hpp"
#include "rite/io.hpp"
#include "rite/utf8.hpp"

namespace rite {

using nlohmann::json;

std::string_view to_string(EmbedMethod method) noexcept {
  switch (method) {
    case EmbedMethod::Echo: return "echo";
    case EmbedMethod::PR: return "pr";
    case EmbedMethod::RiteEcho: return "rite-echo";
    case EmbedMethod::RitePR: return "rite-pr";
  }
  return "unknown";
}

EmbedMethod parse_embed_method(std::string_view name) {
  if (name == "echo" || name == "Echo") return EmbedMethod::Echo;
  if (name == "pr" || name == "PR") return EmbedMethod::PR;
  if (name == "rite-echo" || name == "RiteEcho") return EmbedMethod::RiteEcho;
  if (name == "rite-pr" || name == "RitePR") return EmbedMethod::RitePR;
  throw Error(ErrorCode::InvalidConfig, "unknown embedding method '" + std::string(name) + "'");
}

bool uses_reasoning(EmbedMethod method) noexcept {
  return method == EmbedMethod::RiteEcho || method == EmbedMethod::RitePR;
}

EmbedMethod base_method(EmbedMethod method) noexcept {
  return (method == EmbedMethod::Echo || method == EmbedMethod::RiteEcho) ? EmbedMethod::Echo
                                                                          : EmbedMethod::PR;
}

void PipelineConfig::validate() const {
  reasoning_gen.validate();
  const int mt = reasoning_gen.max_tokens;
  if (mt != 64 && mt != 128 && mt != 256) {
    throw Error(ErrorCode::InvalidConfig, "reasoning max_tokens must be 64, 128 or 256, got " + std::to_string(mt));
  }
  if (echo_pooling == PoolingMode::LastToken) {
    throw Error(ErrorCode::InvalidConfig, "echo pooling must be mean_span or mean_span_shifted");
  }
  if (query_token_limit == 0 || passage_token_limit == 0) {
    throw Error(ErrorCode::InvalidConfig, "token limits must be >= 1");
  }
}

std::string gen_config_hash(const GenConfig& cfg) {
  std::ostringstream canon;
  canon.precision(17);
  canon << "temperature=" << cfg.temperature << ";frequency_penalty=" << cfg.frequency_penalty
        << ";max_tokens=" << cfg.max_tokens << ";n=" << cfg.n_choices << ";stop=";
  for (const auto& s : cfg.stop_sequences) canon << s.size() << ':' << s << ',';
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(crc64(canon.str())));
  return buf;
}

std::string ReasoningCache::Key::str() const {
  return query_id + '\x1f' + std::string(to_string(variant)) + '\x1f' + gen_hash + '\x1f' + model;
}

std::optional<std::string> ReasoningCache::lookup(const Key& key) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key.str());
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ReasoningCache::insert(const Key& key, std::string text) {
  std::lock_guard lock(mutex_);
  entries_[key.str()] = std::move(text);
}

std::size_t ReasoningCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void ReasoningCache::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return;
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  std::lock_guard lock(mutex_);
  while (std::getline(in, line)) {
    ++lineno;
    if (utf8::trim_whitespace(line).empty()) continue;
    try {
      const json j = json::parse(line);
      entries_[j.at("key").get<std::string>()] = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void ReasoningCache::save(const std::filesystem::path& path) const {
  std::string out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [key, text] : entries_) {
      out += json{{"key", key}, {"text", text}}.dump();
      out += '\n';
    }
  }
  write_file_atomic(path, out);
}

std::map<std::string, ReasoningText> load_provided_reasoning(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::map<std::string, ReasoningText> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (utf8::trim_whitespace(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    std::string qid, reasoning;
    try {
      const json j = json::parse(line);
      qid = j.at("qid").get<std::string>();
      reasoning = j.at("reasoning").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
    if (qid.empty()) throw Error(ErrorCode::ParseError, where + ": empty qid");
    if (!out.emplace(qid, ReasoningText::provided(std::move(reasoning))).second) {
      throw Error(ErrorCode::DuplicateQueryId, where + ": qid " + qid);
    }
  }
  return out;
}

std::string format_reasoning_jsonl(const std::vector<std::pair<std::string, ReasoningText>>& entries) {
  std::string out;
  for (const auto& [qid, r] : entries) {
    out += json{{"qid", qid}, {"reasoning", r.text()}}.dump();
    out += '\n';
  }
  return out;
}

EmbedPipeline::EmbedPipeline(const LmBackend& backend, PipelineConfig config, ReasoningCache* cache)
    : backend_(backend), config_(std::move(config)), cache_(cache) {
  config_.validate();
}

ReasoningText EmbedPipeline::elicit_reasoning(const Query& query) const {
  if (query.text.empty()) throw Error(ErrorCode::EmptySubject, "query " + query.id);
  const auto variant = config_.reasoning_variant;

  std::optional<ReasoningCache::Key> key;
  std::optional<std::string> text;
  if (cache_) {
    key = ReasoningCache::Key{query.id, variant, gen_config_hash(config_.reasoning_gen),
                              backend_.info().model_name};
    text = cache_->lookup(*key);
  }
  if (!text) {
    const auto truncated = backend_.truncate_to_tokens(query.text, config_.query_token_limit);
    const auto prompt = assemble(reasoning_template(variant), truncated);
    text = utf8::trim_whitespace(backend_.generate_text(prompt.text, config_.reasoning_gen));
    if (cache_) cache_->insert(*key, *text);
  }
  if (text->empty()) {
    if (config_.empty_reasoning_policy == EmptyReasoningPolicy::Error) {
      throw Error(ErrorCode::EmptyReasoning, "query " + query.id);
    }
    spdlog::warn("empty reasoning for query {}; falling back to the base method", query.id);
  }
  return ReasoningText::generated(std::move(*text), variant);
}

AssembledPrompt EmbedPipeline::query_prompt(const Query& query, EmbedMethod method,
                                            const std::optional<ReasoningText>& reasoning) const {
  if (uses_reasoning(method) && !reasoning) {
    throw Error(ErrorCode::MissingReasoning, std::string(to_string(method)) + " for query " + query.id);
  }
  if (!uses_reasoning(method) && reasoning) {
    throw Error(ErrorCode::UnexpectedReasoning, std::string(to_string(method)) + " for query " + query.id);
  }
  if (query.text.empty()) throw Error(ErrorCode::EmptySubject, "query " + query.id);

  std::string trimmed;
  if (reasoning) {
    trimmed = utf8::trim_whitespace(reasoning->text());
    if (trimmed.empty()) {
      if (config_.empty_reasoning_policy == EmptyReasoningPolicy::Error) {
        throw Error(ErrorCode::EmptyReasoning, "query " + query.id);
      }
      spdlog::warn("empty reasoning for query {}; embedding with {}", query.id,
                   to_string(base_method(method)));
      method = base_method(method);
    }
  }

  const auto subject = backend_.truncate_to_tokens(query.text, config_.query_token_limit);
  switch (method) {
    case EmbedMethod::Echo: return assemble(echo_template(SubjectKind::Query), subject);
    case EmbedMethod::PR: return assemble(pr_template(SubjectKind::Query), subject);
    case EmbedMethod::RiteEcho: return assemble(rite_echo_template(), subject, trimmed);
    case EmbedMethod::RitePR: return assemble(rite_pr_template(), subject, trimmed);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown method");
}

AssembledPrompt EmbedPipeline::document_prompt(const Document& doc, EmbedMethod method) const {
  if (doc.text.empty()) throw Error(ErrorCode::EmptySubject, "document " + doc.id);
  const auto subject = backend_.truncate_to_tokens(doc.text, config_.passage_token_limit);
  return base_method(method) == EmbedMethod::Echo ? assemble(echo_template(SubjectKind::Passage), subject)
                                                  : assemble(pr_template(SubjectKind::Passage), subject);
}

EmbeddingVector EmbedPipeline::embed_prompt(const AssembledPrompt& prompt, TemplateFamily family) const {
  EmbedSpanRequest req;
  req.text = prompt.text;
  if (family == TemplateFamily::Echo) {
    req.span = *prompt.second_subject_span;
    req.pooling = config_.echo_pooling;
  } else {
    req.pooling = PoolingMode::LastToken;
  }
  return backend_.embed_span(req);
}

EmbeddingVector EmbedPipeline::embed_query(const Query& query, EmbedMethod method,
                                           const std::optional<ReasoningText>& reasoning) const {
  const auto prompt = query_prompt(query, method, reasoning);
  return embed_prompt(prompt, prompt.second_subject_span ? TemplateFamily::Echo : TemplateFamily::PromptReps);
}

EmbeddingVector EmbedPipeline::embed_document(const Document& doc, EmbedMethod method) const {
  const auto prompt = document_prompt(doc, method);
  return embed_prompt(prompt, base_method(method) == EmbedMethod::Echo ? TemplateFamily::Echo
                                                                       : TemplateFamily::PromptReps);
}

double score(const EmbeddingVector& query_vec, const EmbeddingVector& doc_vec) {
  return cosine(query_vec, doc_vec);
}

}  // namespace rite
