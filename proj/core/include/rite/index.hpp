#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rite/types.hpp"

namespace rite {

// Exact cosine search over L2-normalized rows.
class VectorIndex {
 public:
  VectorIndex() = default;

  // Rows are normalized and kept in input order. Errors: DimMismatch,
  // DuplicateId, ZeroVector. An empty entry list gives an empty index.
  static VectorIndex build(const std::vector<std::pair<std::string, EmbeddingVector>>& entries);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t i) const { return {matrix_.data() + i * dim_, dim_}; }

  // Top min(k, size()) rows by cosine, ordered by (score desc, id asc).
  // Large indexes are scanned in parallel row chunks; the result does not
  // depend on the chunking.
  std::vector<ScoredDoc> search(const EmbeddingVector& query, std::size_t k) const;

  void save(const std::filesystem::path& path) const;
  static VectorIndex load(const std::filesystem::path& path);

  friend bool operator==(const VectorIndex&, const VectorIndex&) = default;

 private:
  std::vector<ScoredDoc> scan(std::span<const float> unit_query, std::size_t begin, std::size_t end,
                              std::size_t k) const;

  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> matrix_;
};

// Merges per-shard results into the global top-k under the same order.
std::vector<ScoredDoc> merge_top_k(const std::vector<std::vector<ScoredDoc>>& parts, std::size_t k);

}  // namespace rite
