#include "rite/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rite/error.hpp"

namespace rite {

std::string_view to_string(ReasoningVariant variant) noexcept {
  switch (variant) {
    case ReasoningVariant::P1: return "P1";
    case ReasoningVariant::P2: return "P2";
    case ReasoningVariant::P3: return "P3";
  }
  return "P?";
}

ReasoningVariant parse_reasoning_variant(std::string_view name) {
  if (name == "P1" || name == "p1" || name == "1") return ReasoningVariant::P1;
  if (name == "P2" || name == "p2" || name == "2") return ReasoningVariant::P2;
  if (name == "P3" || name == "p3" || name == "3") return ReasoningVariant::P3;
  throw Error(ErrorCode::InvalidConfig, "unknown reasoning variant '" + std::string(name) + "'");
}

ReasoningText ReasoningText::generated(std::string text, ReasoningVariant variant) {
  return ReasoningText(std::move(text), ReasoningSource::Generated, variant);
}

ReasoningText ReasoningText::provided(std::string text) {
  return ReasoningText(std::move(text), ReasoningSource::Provided, std::nullopt);
}

EmbeddingVector::EmbeddingVector(std::vector<float> values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
  if (values_.empty()) {
    throw Error(ErrorCode::InvalidArgument, "embedding vector must have dim >= 1");
  }
  for (const float x : values_) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::InvalidArgument, "embedding vector has a non-finite value");
    }
  }
}

void GenConfig::validate() const {
  if (max_tokens <= 0) {
    throw Error(ErrorCode::InvalidConfig, "max_tokens must be positive");
  }
  if (n_choices <= 0) {
    throw Error(ErrorCode::InvalidConfig, "n_choices must be positive");
  }
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidConfig, "temperature must be a non-negative real");
  }
  if (!std::isfinite(frequency_penalty)) {
    throw Error(ErrorCode::InvalidConfig, "frequency_penalty must be finite");
  }
}

bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

void RetrievalRun::set(const std::string& query_id, std::vector<ScoredDoc> ranked) {
  std::set<std::string_view> seen;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    if (!std::isfinite(ranked[i].score)) {
      throw Error(ErrorCode::InvariantViolation, "non-finite score for query " + query_id);
    }
    if (i > 0 && ranked[i].score > ranked[i - 1].score) {
      throw Error(ErrorCode::InvariantViolation, "scores increase within query " + query_id);
    }
    if (!seen.insert(ranked[i].doc_id).second) {
      throw Error(ErrorCode::InvariantViolation,
                  "doc " + ranked[i].doc_id + " ranked twice for query " + query_id);
    }
  }
  lists_[query_id] = std::move(ranked);
}

const std::vector<ScoredDoc>* RetrievalRun::find(const std::string& query_id) const {
  const auto it = lists_.find(query_id);
  return it == lists_.end() ? nullptr : &it->second;
}

void Qrels::set(const std::string& query_id, const std::string& doc_id, int relevance) {
  if (relevance < 0) {
    throw Error(ErrorCode::NegativeRelevance,
                "relevance " + std::to_string(relevance) + " for (" + query_id + ", " + doc_id + ")");
  }
  judgments_[query_id][doc_id] = relevance;
}

int Qrels::relevance(const std::string& query_id, const std::string& doc_id) const {
  const auto q = judgments_.find(query_id);
  if (q == judgments_.end()) return 0;
  const auto d = q->second.find(doc_id);
  return d == q->second.end() ? 0 : d->second;
}

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

double l2_norm(std::span<const float> v) { return std::sqrt(dot(v, v)); }

EmbeddingVector l2_normalize(const EmbeddingVector& v) {
  const double norm = l2_norm(v.values());
  if (!(norm > 0.0) || !std::isfinite(1.0 / norm)) {
    throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  }
  std::vector<float> out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(v[i]) / norm);
  }
  return EmbeddingVector(std::move(out), true);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorCode::DimMismatch,
                std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  const double na = l2_norm(a.values());
  const double nb = l2_norm(b.values());
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  }
  return std::clamp(dot(a.values(), b.values()) / (na * nb), -1.0, 1.0);
}

}  // namespace rite
