#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rite {

struct Query {
  std::string id;
  std::string text;
};

struct Document {
  std::string id;
  std::string text;
};

enum class ReasoningVariant { P1, P2, P3 };
enum class ReasoningSource { Generated, Provided };

std::string_view to_string(ReasoningVariant variant) noexcept;
ReasoningVariant parse_reasoning_variant(std::string_view name);

// Intermediate text produced from a query before embedding, or supplied
// externally (oracle mode). An empty text is the fallback marker: callers
// degrade RITE methods to their base method when they see it.
class ReasoningText {
 public:
  static ReasoningText generated(std::string text, ReasoningVariant variant);
  static ReasoningText provided(std::string text);

  const std::string& text() const noexcept { return text_; }
  ReasoningSource source() const noexcept { return source_; }
  std::optional<ReasoningVariant> variant() const noexcept { return variant_; }
  bool empty() const noexcept { return text_.empty(); }

  friend bool operator==(const ReasoningText&, const ReasoningText&) = default;

 private:
  ReasoningText(std::string text, ReasoningSource source,
                std::optional<ReasoningVariant> variant)
      : text_(std::move(text)), source_(source), variant_(variant) {}

  std::string text_;
  ReasoningSource source_;
  std::optional<ReasoningVariant> variant_;
};

// Fixed-dimension float vector. Values are validated finite on
// construction; `normalized` records that the vector has unit L2 norm.
class EmbeddingVector {
 public:
  explicit EmbeddingVector(std::vector<float> values, bool normalized = false);

  std::span<const float> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  bool normalized() const noexcept { return normalized_; }
  float operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

 private:
  std::vector<float> values_;
  bool normalized_;
};

struct GenConfig {
  double temperature = 0.0;
  double frequency_penalty = 0.3;
  int max_tokens = 128;
  int n_choices = 1;
  std::vector<std::string> stop_sequences;

  // Throws InvalidConfig for non-positive max_tokens/n_choices or a
  // negative temperature. Temperature != 0 is the backend's call.
  void validate() const;

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

struct ScoredDoc {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

// (score desc, doc_id asc): the total order every ranked list follows.
bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) noexcept;

class RetrievalRun {
 public:
  // Rejects lists with increasing scores or repeated doc ids.
  void set(const std::string& query_id, std::vector<ScoredDoc> ranked);

  const std::map<std::string, std::vector<ScoredDoc>>& queries() const noexcept {
    return lists_;
  }
  const std::vector<ScoredDoc>* find(const std::string& query_id) const;
  std::size_t size() const noexcept { return lists_.size(); }

 private:
  std::map<std::string, std::vector<ScoredDoc>> lists_;
};

class Qrels {
 public:
  void set(const std::string& query_id, const std::string& doc_id, int relevance);

  // 0 when unjudged.
  int relevance(const std::string& query_id, const std::string& doc_id) const;

  const std::map<std::string, std::map<std::string, int>>& judgments() const noexcept {
    return judgments_;
  }

 private:
  std::map<std::string, std::map<std::string, int>> judgments_;
};

// Dot product with 64-bit accumulation in fixed left-to-right order.
double dot(std::span<const float> a, std::span<const float> b);
double l2_norm(std::span<const float> v);

EmbeddingVector l2_normalize(const EmbeddingVector& v);

// Cosine of the angle between a and b, clamped to [-1, 1].
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

}  // namespace rite
