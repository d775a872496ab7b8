#include "rite/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>
#include <system_error>

#include "rite/error.hpp"
#include "rite/utf8.hpp"

namespace rite {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

namespace {

// {"id", "text"} JSONL shared by queries and corpus files.
template <typename Record>
std::vector<Record> load_id_text_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Record> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (utf8::trim_whitespace(line).empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    Record rec;
    try {
      const json j = json::parse(line);
      rec.id = j.at("id").get<std::string>();
      rec.text = j.at("text").get<std::string>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where + ": " + e.what());
    }
    if (rec.id.empty()) throw Error(ErrorCode::ParseError, where + ": empty id");
    if (!utf8::is_valid(rec.text)) throw Error(ErrorCode::ParseError, where + ": text is not valid UTF-8");
    if (!seen.insert(rec.id).second) throw Error(ErrorCode::DuplicateId, where + ": id " + rec.id);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<Query> load_queries(const std::filesystem::path& path) {
  auto queries = load_id_text_jsonl<Query>(path);
  for (const auto& q : queries) {
    if (q.text.empty()) throw Error(ErrorCode::ParseError, path.string() + ": query " + q.id + " has empty text");
  }
  return queries;
}

std::vector<Document> load_corpus(const std::filesystem::path& path) {
  return load_id_text_jsonl<Document>(path);
}

std::string format_trec_run(const RetrievalRun& run, std::string_view tag) {
  std::string out;
  char score[32];
  for (const auto& [qid, ranked] : run.queries()) {
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      std::snprintf(score, sizeof score, "%.9f", ranked[i].score);
      out += qid;
      out += " Q0 ";
      out += ranked[i].doc_id;
      out += ' ';
      out += std::to_string(i + 1);
      out += ' ';
      out += score;
      out += ' ';
      out += tag;
      out += '\n';
    }
  }
  return out;
}

RetrievalRun parse_trec_run(std::string_view contents) {
  std::map<std::string, std::vector<std::pair<long, ScoredDoc>>> lists;
  std::istringstream in{std::string(contents)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (utf8::trim_whitespace(line).empty()) continue;
    std::istringstream fields(line);
    std::string qid, q0, doc, rank_text, score_text, tag;
    if (!(fields >> qid >> q0 >> doc >> rank_text >> score_text >> tag)) {
      throw Error(ErrorCode::ParseError, "run line " + std::to_string(lineno) + ": expected 6 columns");
    }
    long rank = 0;
    double score = 0.0;
    const auto [rp, rec] = std::from_chars(rank_text.data(), rank_text.data() + rank_text.size(), rank);
    const auto [sp, sec] = std::from_chars(score_text.data(), score_text.data() + score_text.size(), score);
    if (rec != std::errc() || rp != rank_text.data() + rank_text.size() || sec != std::errc() ||
        sp != score_text.data() + score_text.size()) {
      throw Error(ErrorCode::ParseError, "run line " + std::to_string(lineno) + ": bad rank or score");
    }
    lists[qid].push_back({rank, ScoredDoc{doc, score}});
  }
  RetrievalRun run;
  for (auto& [qid, entries] : lists) {
    std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<ScoredDoc> ranked;
    ranked.reserve(entries.size());
    for (auto& e : entries) ranked.push_back(std::move(e.second));
    try {
      run.set(qid, std::move(ranked));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, std::string("run file: ") + e.what());
    }
  }
  return run;
}

RetrievalRun load_trec_run(const std::filesystem::path& path) { return parse_trec_run(read_file(path)); }

}  // namespace rite
