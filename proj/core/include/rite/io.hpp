#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rite/types.hpp"

namespace rite {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// JSONL with one {"id": str, "text": str} object per line. Blank lines are
// skipped. ParseError names the line; DuplicateId on repeated ids.
std::vector<Query> load_queries(const std::filesystem::path& path);
std::vector<Document> load_corpus(const std::filesystem::path& path);

// TREC run lines: "query_id Q0 doc_id rank score tag".
std::string format_trec_run(const RetrievalRun& run, std::string_view tag);
RetrievalRun parse_trec_run(std::string_view contents);
RetrievalRun load_trec_run(const std::filesystem::path& path);

}  // namespace rite
