#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <openssl/evp.h>

#include "corpus_atlas/io.hpp"

namespace corpus_atlas::digest {

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

inline std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(io::read_file(path)); }

struct TreeDigest {
  std::string sha256;
  std::uintmax_t bytes = 0;
  std::size_t files = 0;
};

/// Digest of a regular file, or of a directory as the SHA-256 of
/// "<relative path>\0<file sha256>\n" lines in sorted path order.
inline TreeDigest tree_digest(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(path)) {
    return {file_sha256(path), fs::file_size(path), 1};
  }
  if (!fs::is_directory(path)) throw std::runtime_error("cannot digest '" + path.string() + "': not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(path)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(), [&](const fs::path& a, const fs::path& b) {
    return fs::relative(a, path).generic_string() < fs::relative(b, path).generic_string();
  });
  TreeDigest d;
  std::string listing;
  for (const auto& f : files) {
    listing += fs::relative(f, path).generic_string();
    listing += '\0';
    listing += file_sha256(f);
    listing += '\n';
    d.bytes += fs::file_size(f);
  }
  d.files = files.size();
  d.sha256 = sha256_hex(listing);
  return d;
}

}  // namespace corpus_atlas::digest
