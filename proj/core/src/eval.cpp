#include "rite/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <json.hpp>
#include <set>
#include <sstream>

#include "rite/error.hpp"
#include "rite/io.hpp"
#include "rite/utf8.hpp"

namespace rite {

using nlohmann::json;

Qrels parse_qrels(std::string_view contents) {
  Qrels qrels;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    auto eol = contents.find('\n', pos);
    if (eol == std::string_view::npos) eol = contents.size();
    std::string_view line = contents.substr(pos, eol - pos);
    pos = eol + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (utf8::trim_whitespace(line).empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    const auto where = "qrels line " + std::to_string(lineno);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw Error(ErrorCode::ParseError, where + ": expected query_id<TAB>doc_id<TAB>relevance");
    }
    int rel = 0;
    const auto rel_text = fields[2];
    const auto [ptr, ec] = std::from_chars(rel_text.data(), rel_text.data() + rel_text.size(), rel);
    if (ec != std::errc() || ptr != rel_text.data() + rel_text.size()) {
      throw Error(ErrorCode::ParseError, where + ": relevance '" + std::string(rel_text) + "' is not an integer");
    }
    try {
      qrels.set(std::string(fields[0]), std::string(fields[1]), rel);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return qrels;
}

Qrels load_qrels(const std::filesystem::path& path) { return parse_qrels(read_file(path)); }

double dcg_at_k(std::span<const double> gains, std::size_t k) {
  const std::size_t n = std::min(k, gains.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += gains[i] / std::log2(static_cast<double>(i) + 2.0);
  return sum;
}

EvalReport ndcg_at_k(const RetrievalRun& run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  EvalReport report;
  report.k = k;

  std::set<std::string> query_ids;
  for (const auto& [qid, _] : run.queries()) query_ids.insert(qid);
  for (const auto& [qid, _] : qrels.judgments()) query_ids.insert(qid);

  double total = 0.0;
  for (const auto& qid : query_ids) {
    std::vector<double> ideal;
    if (const auto it = qrels.judgments().find(qid); it != qrels.judgments().end()) {
      for (const auto& [doc, rel] : it->second) {
        if (rel > 0) ideal.push_back(rel);
      }
    }
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    const double idcg = dcg_at_k(ideal, k);
    if (idcg <= 0.0) {
      report.skipped.push_back(qid);
      continue;
    }
    std::vector<double> gains;
    if (const auto* ranked = run.find(qid)) {
      for (std::size_t i = 0; i < std::min(k, ranked->size()); ++i) {
        gains.push_back(qrels.relevance(qid, (*ranked)[i].doc_id));
      }
    }
    const double ndcg = dcg_at_k(gains, k) / idcg;
    report.per_query[qid] = ndcg;
    total += ndcg;
  }
  report.mean = report.per_query.empty() ? 0.0 : total / static_cast<double>(report.per_query.size());
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  j["k"] = k;
  j["mean"] = mean;
  j["per_query"] = per_query;
  j["skipped"] = skipped;
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.k = j.at("k").get<std::size_t>();
    r.mean = j.at("mean").get<double>();
    r.per_query = j.at("per_query").get<std::map<std::string, double>>();
    r.skipped = j.at("skipped").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("eval report: ") + e.what());
  }
}

RunComparison compare_runs(const std::vector<std::pair<std::string, EvalReport>>& reports) {
  RunComparison cmp;
  if (reports.empty()) return cmp;
  cmp.k = reports.front().second.k;
  for (const auto& [name, report] : reports) {
    if (report.k != cmp.k) {
      throw Error(ErrorCode::KMismatch, name + " uses k=" + std::to_string(report.k) + ", expected k=" +
                                            std::to_string(cmp.k));
    }
    cmp.means.emplace_back(name, report.mean);
  }
  for (std::size_t i = 0; i < cmp.means.size(); ++i) {
    for (std::size_t j = i + 1; j < cmp.means.size(); ++j) {
      cmp.deltas.push_back({cmp.means[i].first, cmp.means[j].first, cmp.means[j].second - cmp.means[i].second});
    }
  }
  return cmp;
}

std::string RunComparison::render_text() const {
  std::size_t width = 4;
  for (const auto& [name, _] : means) width = std::max(width, name.size());
  for (const auto& d : deltas) width = std::max(width, d.from.size() + d.to.size() + 4);

  std::ostringstream out;
  char buf[64];
  auto row = [&](const std::string& label, const std::string& value) {
    out << label << std::string(width - label.size() + 2, ' ') << value << '\n';
  };
  row("run", "nDCG@" + std::to_string(k) + " x100");
  for (const auto& [name, mean] : means) {
    std::snprintf(buf, sizeof buf, "%.1f", mean * 100.0);
    row(name, buf);
  }
  if (!deltas.empty()) {
    out << '\n';
    for (const auto& d : deltas) {
      std::snprintf(buf, sizeof buf, "%+.1f", d.delta * 100.0);
      row(d.to + " vs " + d.from, buf);
    }
  }
  return out.str();
}

std::string RunComparison::to_json() const {
  json j;
  j["k"] = k;
  j["runs"] = json::array();
  for (const auto& [name, mean] : means) j["runs"].push_back({{"name", name}, {"mean", mean}});
  j["deltas"] = json::array();
  for (const auto& d : deltas) j["deltas"].push_back({{"from", d.from}, {"to", d.to}, {"delta", d.delta}});
  return j.dump(2) + "\n";
}

}  // namespace rite
