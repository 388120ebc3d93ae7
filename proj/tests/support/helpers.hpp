#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "corpus_atlas/matrix.hpp"
#include "oracles.hpp"

namespace testing_support {

inline corpus_atlas::Matrix<double> to_matrix(const oracle::Points& x) {
  corpus_atlas::Matrix<double> m(x.size(), x.empty() ? 0 : x.front().size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t c = 0; c < x[i].size(); ++c) m(i, c) = x[i][c];
  }
  return m;
}

inline oracle::Points to_points(const corpus_atlas::Matrix<double>& m) {
  oracle::Points x(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t c = 0; c < m.cols(); ++c) x[i][c] = m(i, c);
  }
  return x;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("corpus-atlas-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Abstract of exactly `words` words.
inline std::string words(std::size_t count, const std::string& word = "token") {
  std::string out;
  for (std::size_t i = 0; i < count; ++i) out += (i ? " " : "") + word;
  return out;
}

}  // namespace testing_support
