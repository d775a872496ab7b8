#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rite/types.hpp"

namespace rite {

// Tab-separated "query_id<TAB>doc_id<TAB>relevance" lines; blank lines are
// skipped. ParseError names the offending line; NegativeRelevance for < 0.
Qrels parse_qrels(std::string_view contents);
Qrels load_qrels(const std::filesystem::path& path);

// sum_{i=1}^{min(k,n)} gains[i] / log2(i + 1), linear gain.
double dcg_at_k(std::span<const double> gains, std::size_t k);

struct EvalReport {
  std::size_t k = 10;
  std::map<std::string, double> per_query;  // judged queries only
  double mean = 0.0;
  std::vector<std::string> skipped;         // queries with no relevant documents

  // {"k":10,"mean":..,"per_query":{qid:..},"skipped":[..]}
  std::string to_json() const;
  static EvalReport from_json(std::string_view text);
};

// Gains are the judged relevances of the ranked docs (unjudged = 0). The
// ideal ranking uses every judged-relevant doc of the query. Queries whose
// ideal DCG is 0 are listed in `skipped` and excluded from the mean; a
// judged query missing from the run scores 0.
EvalReport ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k = 10);

struct RunComparison {
  struct Delta {
    std::string from;
    std::string to;
    double delta = 0.0;  // mean(to) - mean(from)
  };

  std::size_t k = 10;
  std::vector<std::pair<std::string, double>> means;
  std::vector<Delta> deltas;  // every ordered pair (i < j)

  // Plain-text table; values are scaled by 100 for display.
  std::string render_text() const;
  std::string to_json() const;
};

// KMismatch when the reports disagree on k.
RunComparison compare_runs(const std::vector<std::pair<std::string, EvalReport>>& reports);

}  // namespace rite
