#pragma once

// EMB1 embedding exchange format.
//
//   bytes 0..7     ASCII magic "EMBV0001"
//   bytes 8..11    header length H, uint32 little-endian
//   bytes 12..12+H UTF-8 JSON {"n":..,"d":..,"dtype":"f32le","variant":..,"ids":[..]}
//   remaining      exactly n*d*4 bytes of little-endian float32, row-major

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus_atlas/corpus.hpp"
#include "corpus_atlas/io.hpp"
#include "corpus_atlas/matrix.hpp"

namespace corpus_atlas::embedstore {

inline constexpr std::string_view kMagic = "EMBV0001";
inline constexpr std::size_t kPreambleBytes = 12;

struct EmbeddingMatrix {
  Matrix<float> values;
  std::vector<std::string> ids;
  std::string variant;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t dim() const noexcept { return values.cols(); }

  bool operator==(const EmbeddingMatrix&) const = default;
};

/// n = |ids|, finite values, unique ids.
inline void validate(const EmbeddingMatrix& m) {
  if (m.ids.size() != m.rows()) {
    throw std::invalid_argument("embedding matrix has " + std::to_string(m.rows()) + " rows but " +
                                std::to_string(m.ids.size()) + " ids");
  }
  if (!all_finite(m.values)) throw std::invalid_argument("embedding matrix contains non-finite values");
  std::unordered_set<std::string_view> seen;
  for (const auto& id : m.ids) {
    if (!seen.insert(id).second) throw std::invalid_argument("duplicate embedding id '" + id + "'");
  }
}

namespace detail {

inline void put_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline std::string encode_embeddings(const EmbeddingMatrix& m) {
  validate(m);
  nlohmann::ordered_json header;
  header["n"] = m.rows();
  header["d"] = m.dim();
  header["dtype"] = "f32le";
  header["variant"] = m.variant;
  header["ids"] = m.ids;
  const std::string text = header.dump();
  if (text.size() > 0xFFFFFFFFu) throw std::length_error("EMB1 header exceeds 4 GiB");

  std::string out;
  out.reserve(kPreambleBytes + text.size() + m.values.values().size() * 4);
  out.append(kMagic);
  detail::put_u32le(out, static_cast<std::uint32_t>(text.size()));
  out.append(text);
  for (const float v : m.values.values()) detail::put_u32le(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline EmbeddingMatrix decode_embeddings(std::string_view bytes, std::string_view source = "<memory>") {
  const std::string where(source);
  if (bytes.size() < kPreambleBytes) {
    throw std::runtime_error(where + ": truncated EMB1 preamble (" + std::to_string(bytes.size()) +
                             " bytes)");
  }
  if (bytes.substr(0, kMagic.size()) != kMagic) throw std::runtime_error(where + ": bad EMB1 magic");
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t header_len = detail::get_u32le(raw + 8);
  if (kPreambleBytes + header_len > bytes.size()) {
    throw std::runtime_error(where + ": header length " + std::to_string(header_len) +
                             " exceeds file size");
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(kPreambleBytes, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(where + ": malformed EMB1 header: " + e.what());
  }
  std::uint64_t n = 0, d = 0;
  EmbeddingMatrix m;
  try {
    n = header.at("n").get<std::uint64_t>();
    d = header.at("d").get<std::uint64_t>();
    if (header.at("dtype").get<std::string>() != "f32le") {
      throw std::runtime_error(where + ": unsupported dtype '" +
                               header.at("dtype").get<std::string>() + "'");
    }
    m.variant = header.at("variant").get<std::string>();
    m.ids = header.at("ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(where + ": invalid EMB1 header: " + e.what());
  }
  if (m.ids.size() != n) {
    throw std::runtime_error(where + ": header declares n=" + std::to_string(n) + " but lists " +
                             std::to_string(m.ids.size()) + " ids");
  }
  if (d != 0 && n > (UINT64_MAX / 4) / d) throw std::runtime_error(where + ": n*d overflows");
  const std::uint64_t expected = n * d * 4;
  const std::uint64_t actual = bytes.size() - kPreambleBytes - header_len;
  if (expected != actual) {
    throw std::runtime_error(where + ": payload length mismatch: expected " + std::to_string(expected) +
                             " bytes, found " + std::to_string(actual));
  }

  std::vector<float> values(n * d);
  const unsigned char* payload = raw + kPreambleBytes + header_len;
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(detail::get_u32le(payload + 4 * i));
  }
  m.values = Matrix<float>(n, d, std::move(values));
  try {
    validate(m);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(where + ": " + e.what());
  }
  return m;
}

/// Writes nothing if validation fails.
inline void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path) {
  const std::string bytes = encode_embeddings(m);
  io::write_file(path, bytes);
}

inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  return decode_embeddings(io::read_file(path), path.string());
}

/// Rows with the given ids, in that order. Every id must be present.
inline EmbeddingMatrix select(const EmbeddingMatrix& m, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < m.ids.size(); ++i) row_of.emplace(m.ids[i], i);
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  for (const auto& id : ids) {
    const auto it = row_of.find(id);
    if (it == row_of.end()) throw std::invalid_argument("no embedding for id '" + id + "'");
    rows.push_back(it->second);
  }
  EmbeddingMatrix out;
  out.values = m.values.select_rows(rows);
  out.ids.assign(ids.begin(), ids.end());
  out.variant = m.variant;
  return out;
}

struct Alignment {
  EmbeddingMatrix matrix;                  // rows in corpus order
  std::vector<std::string> missing_embedding;  // corpus ids without a row
  std::vector<std::string> missing_in_corpus;  // rows whose id is not in the corpus
};

inline Alignment align(std::span<const std::string> corpus_ids, const EmbeddingMatrix& m) {
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < m.ids.size(); ++i) row_of.emplace(m.ids[i], i);

  Alignment a;
  std::vector<std::size_t> rows;
  std::unordered_set<std::string_view> in_corpus;
  for (const auto& id : corpus_ids) {
    in_corpus.insert(id);
    if (const auto it = row_of.find(id); it != row_of.end()) {
      rows.push_back(it->second);
      a.matrix.ids.push_back(id);
    } else {
      a.missing_embedding.push_back(id);
    }
  }
  for (const auto& id : m.ids) {
    if (!in_corpus.contains(id)) a.missing_in_corpus.push_back(id);
  }
  if (rows.empty()) throw std::runtime_error("align: corpus and embedding ids do not overlap");
  a.matrix.values = m.values.select_rows(rows);
  a.matrix.variant = m.variant;
  return a;
}

inline Alignment align(const corpus::Corpus& corpus, const EmbeddingMatrix& m) {
  const auto ids = corpus.ids();
  return align(std::span<const std::string>(ids), m);
}

}  // namespace corpus_atlas::embedstore
