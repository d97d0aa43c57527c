#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <unistd.h>

#include "cwms/corpus.hpp"
#include "cwms/synthetic.hpp"

namespace cwms::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cwms-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small benchmark for tests that need realistic text without the cost of
// the full-size one.
inline BenchmarkSpec tiny_spec(std::uint64_t seed = 7) {
  BenchmarkSpec s;
  s.seed = seed;
  s.documents = 300;
  s.queries = 80;
  s.topics = 15;
  s.background_words = 120;
  return s;
}

// Random lowercase word text of `words` words.
inline std::string random_text(std::mt19937_64& rng, int words) {
  std::uniform_int_distribution<int> len(2, 7), ch(0, 7);
  std::string out;
  for (int w = 0; w < words; ++w) {
    if (w) out.push_back(' ');
    for (int i = len(rng); i > 0; --i) out.push_back(static_cast<char>('a' + ch(rng)));
  }
  return out;
}

}  // namespace cwms::testing
