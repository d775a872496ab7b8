#include "rite/index.hpp"

#include <algorithm>
#include <future>
#include <thread>
#include <unordered_set>

#include "rite/container.hpp"
#include "rite/error.hpp"

namespace rite {
namespace {

constexpr std::size_t kRowsPerChunk = 8192;

void keep_top_k(std::vector<ScoredDoc>& docs, std::size_t k) {
  const std::size_t n = std::min(k, docs.size());
  std::partial_sort(docs.begin(), docs.begin() + static_cast<std::ptrdiff_t>(n), docs.end(), ranks_before);
  docs.resize(n);
}

}  // namespace

VectorIndex VectorIndex::build(const std::vector<std::pair<std::string, EmbeddingVector>>& entries) {
  VectorIndex index;
  if (entries.empty()) return index;
  index.dim_ = entries.front().second.dim();
  index.ids_.reserve(entries.size());
  index.matrix_.reserve(entries.size() * index.dim_);
  std::unordered_set<std::string_view> seen;
  for (const auto& [id, vec] : entries) {
    if (vec.dim() != index.dim_) {
      throw Error(ErrorCode::DimMismatch, "entry " + id + " has dim " + std::to_string(vec.dim()) +
                                              ", expected " + std::to_string(index.dim_));
    }
    if (!seen.insert(id).second) throw Error(ErrorCode::DuplicateId, "document id " + id);
    const auto unit = l2_normalize(vec);
    index.ids_.push_back(id);
    index.matrix_.insert(index.matrix_.end(), unit.values().begin(), unit.values().end());
  }
  return index;
}

std::vector<ScoredDoc> VectorIndex::scan(std::span<const float> unit_query, std::size_t begin,
                                         std::size_t end, std::size_t k) const {
  std::vector<ScoredDoc> out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back({ids_[i], std::clamp(dot(unit_query, row(i)), -1.0, 1.0)});
  }
  keep_top_k(out, k);
  return out;
}

std::vector<ScoredDoc> VectorIndex::search(const EmbeddingVector& query, std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  if (empty()) return {};
  if (query.dim() != dim_) {
    throw Error(ErrorCode::DimMismatch, "query dim " + std::to_string(query.dim()) + ", index dim " +
                                            std::to_string(dim_));
  }
  const auto unit = l2_normalize(query);
  const std::size_t chunks = (size() + kRowsPerChunk - 1) / kRowsPerChunk;
  const std::size_t workers = std::min<std::size_t>(chunks, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) return scan(unit.values(), 0, size(), k);

  std::vector<std::future<std::vector<ScoredDoc>>> futures;
  futures.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t begin = c * kRowsPerChunk;
    const std::size_t end = std::min(size(), begin + kRowsPerChunk);
    futures.push_back(std::async(std::launch::async, [this, &unit, begin, end, k] {
      return scan(unit.values(), begin, end, k);
    }));
  }
  std::vector<std::vector<ScoredDoc>> parts;
  parts.reserve(chunks);
  for (auto& f : futures) parts.push_back(f.get());
  return merge_top_k(parts, k);
}

std::vector<ScoredDoc> merge_top_k(const std::vector<std::vector<ScoredDoc>>& parts, std::size_t k) {
  std::vector<ScoredDoc> all;
  for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
  keep_top_k(all, k);
  return all;
}

void VectorIndex::save(const std::filesystem::path& path) const {
  VectorContainer c;
  c.role = ContainerRole::Index;
  c.dim = static_cast<std::uint32_t>(dim_);
  c.ids = ids_;
  c.values = matrix_;
  write_container(path, c);
}

VectorIndex VectorIndex::load(const std::filesystem::path& path) {
  VectorContainer c = read_container(path);
  if (c.role != ContainerRole::Index) throw Error(ErrorCode::FormatError, "container is not an index");
  VectorIndex index;
  std::unordered_set<std::string_view> seen;
  for (const auto& id : c.ids) {
    if (!seen.insert(id).second) throw Error(ErrorCode::FormatError, "duplicate id " + id + " in index file");
  }
  index.dim_ = c.ids.empty() ? 0 : c.dim;
  index.ids_ = std::move(c.ids);
  index.matrix_ = std::move(c.values);
  return index;
}

}  // namespace rite
