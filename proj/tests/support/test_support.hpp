#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace rite::testing {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(RITE_FIXTURE_DIR) / rel;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("rite-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Copies the synthetic dataset into `dir` and returns the config path.
inline std::filesystem::path stage_synthetic(const std::filesystem::path& dir) {
  for (const auto& e : std::filesystem::directory_iterator(fixture("synthetic"))) {
    std::filesystem::copy_file(e.path(), dir / e.path().filename(),
                               std::filesystem::copy_options::overwrite_existing);
  }
  return dir / "run.json";
}

// Random text mixing ASCII, multi-byte UTF-8, spaces and punctuation.
inline std::string random_text(std::mt19937_64& rng, std::size_t min_chars, std::size_t max_chars) {
  static const char* pieces[] = {"a", "b", "q", "z", "e", " ", " ", ".", ",", ":", "\"", "7",
                                 "\xC3\xA9", "\xCE\xBB", "\xE2\x82\xAC", "\xE4\xB8\xAD", "\xF0\x9F\x99\x82"};
  std::uniform_int_distribution<std::size_t> len(min_chars, max_chars);
  std::uniform_int_distribution<std::size_t> pick(0, std::size(pieces) - 1);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s += pieces[pick(rng)];
  return s;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace rite::testing
