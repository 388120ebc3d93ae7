#pragma once

// Corpus ingestion: arXiv-metadata records, quality filters, macro-category
// mapping, abstract-length statistics and deterministic splits.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus_atlas/io.hpp"
#include "corpus_atlas/random.hpp"

namespace corpus_atlas::corpus {

struct FilterPolicy {
  std::size_t min_abstract_words = 31;
  std::size_t min_category_count = 250;
};

struct PaperRecord {
  std::string id;
  std::string abstract;
  std::vector<std::string> categories;
  std::size_t word_count = 0;

  bool operator==(const PaperRecord&) const = default;
};

/// What each filtering rule removed, in application order.
struct FilterLog {
  std::size_t input_lines = 0;
  std::size_t malformed = 0;
  std::size_t duplicates = 0;
  std::size_t withdrawn = 0;
  std::size_t short_abstracts = 0;
  std::vector<std::string> stripped_categories;
  std::size_t stripped_labels = 0;
  std::size_t unlabeled_records = 0;
  std::size_t kept = 0;
  std::vector<std::string> messages;  // first kMaxMessages line diagnostics

  static constexpr std::size_t kMaxMessages = 100;

  void note(std::string message) {
    if (messages.size() < kMaxMessages) messages.push_back(std::move(message));
  }
};

struct Corpus {
  std::vector<PaperRecord> records;
  std::map<std::string, std::size_t> category_counts;
  FilterLog provenance;
  FilterPolicy policy;

  std::size_t size() const noexcept { return records.size(); }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.id);
    return out;
  }
};

struct LengthStats {
  std::size_t n = 0;
  double mean = 0, std = 0, min = 0, q25 = 0, q50 = 0, q75 = 0, max = 0;
};

struct CategoryHistograms {
  std::vector<std::pair<std::string, std::size_t>> ranked;  // count desc, code asc
  std::map<std::size_t, std::size_t> multiplicity;          // labels per paper -> papers
};

struct SplitIndex {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Text helpers

namespace detail {

/// Decodes one UTF-8 code point at `pos`; malformed bytes decode as themselves.
inline char32_t decode_utf8(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto continuation = [&](std::size_t k) -> int {
    if (pos + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    pos += 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    if (const int c1 = continuation(1); c1 >= 0) {
      pos += 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = continuation(1), c2 = continuation(2);
    if (c1 >= 0 && c2 >= 0) {
      pos += 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = continuation(1), c2 = continuation(2), c3 = continuation(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      pos += 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  pos += 1;
  return 0xFFFD;
}

/// Unicode White_Space property.
constexpr bool is_unicode_space(char32_t c) noexcept {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

}  // namespace detail

/// Number of maximal runs of non-whitespace code points.
inline std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (std::size_t pos = 0; pos < text.size();) {
    const bool space = detail::is_unicode_space(detail::decode_utf8(text, pos));
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

inline bool looks_withdrawn(std::string_view abstract) {
  static const std::regex notice(R"(this\s+(paper|article|submission)\s+(has\s+been|is)\s+withdrawn)",
                                 std::regex::ECMAScript | std::regex::icase);
  static const std::regex leading(R"(^\s*withdrawn)", std::regex::ECMAScript | std::regex::icase);
  const std::string text(abstract);
  return std::regex_search(text, notice) || std::regex_search(text, leading);
}

/// Whitespace-separated category codes, duplicates removed, first occurrence kept.
inline std::vector<std::string> split_categories(std::string_view field) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < field.size()) {
    while (pos < field.size() && std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < field.size() && !std::isspace(static_cast<unsigned char>(field[pos]))) ++pos;
    if (pos > start) {
      std::string code(field.substr(start, pos - start));
      if (std::find(out.begin(), out.end(), code) == out.end()) out.push_back(std::move(code));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Macro categories

using AliasMap = std::map<std::string, std::string, std::less<>>;

/// math-ph is the archive-level twin of math.MP.
inline const AliasMap& default_aliases() {
  static const AliasMap aliases{{"math-ph", "math"}};
  return aliases;
}

inline std::string macro_of(std::string_view category, const AliasMap& aliases) {
  if (const auto it = aliases.find(category); it != aliases.end()) return it->second;
  return std::string(category.substr(0, category.find('.')));
}

inline std::string macro_of(std::string_view category) { return macro_of(category, default_aliases()); }

/// Reads `code macro` or `code=macro` lines ('#' comments) on top of the defaults.
inline AliasMap load_alias_file(const std::filesystem::path& path) {
  AliasMap aliases = default_aliases();
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), '=', ' ');
    std::istringstream fields(line);
    std::string code, macro, extra;
    if (!(fields >> code)) continue;
    if (!(fields >> macro) || (fields >> extra)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 'code macro'");
    }
    aliases[code] = macro;
  }
  return aliases;
}

// ---------------------------------------------------------------------------
// Loading and filtering

/// Parses line-delimited JSON records; malformed lines are skipped and logged.
inline std::vector<PaperRecord> parse_records(std::istream& in, FilterLog& log) {
  std::vector<PaperRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    ++log.input_lines;
    auto reject = [&](const std::string& why) {
      ++log.malformed;
      log.note("line " + std::to_string(line_no) + ": " + why);
    };
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      reject(std::string("invalid JSON (") + e.what() + ")");
      continue;
    }
    if (!obj.is_object()) {
      reject("record is not a JSON object");
      continue;
    }
    const auto id = obj.find("id");
    const auto abstract = obj.find("abstract");
    const auto categories = obj.find("categories");
    if (id == obj.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
      reject("missing or empty string field 'id'");
      continue;
    }
    if (abstract == obj.end() || !abstract->is_string()) {
      reject("missing string field 'abstract'");
      continue;
    }
    PaperRecord record;
    if (categories != obj.end() && categories->is_string()) {
      record.categories = split_categories(categories->get_ref<const std::string&>());
    } else if (categories != obj.end() && categories->is_array() &&
               std::all_of(categories->begin(), categories->end(),
                           [](const auto& c) { return c.is_string(); })) {
      for (const auto& c : *categories) {
        for (auto& code : split_categories(c.get_ref<const std::string&>())) {
          if (std::find(record.categories.begin(), record.categories.end(), code) ==
              record.categories.end()) {
            record.categories.push_back(std::move(code));
          }
        }
      }
    } else {
      reject("missing field 'categories'");
      continue;
    }
    record.id = id->get<std::string>();
    record.abstract = abstract->get<std::string>();
    record.word_count = count_words(record.abstract);
    records.push_back(std::move(record));
  }
  return records;
}

/// dedup (last occurrence wins) -> withdrawal -> length -> category count ->
/// drop records left without labels.
inline Corpus apply_filters(std::vector<PaperRecord> records, const FilterPolicy& policy,
                            FilterLog log = {}) {
  std::unordered_map<std::string, std::size_t> last_seen;
  for (std::size_t i = 0; i < records.size(); ++i) last_seen[records[i].id] = i;

  std::vector<PaperRecord> kept;
  kept.reserve(last_seen.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    if (last_seen[r.id] != i) {
      ++log.duplicates;
      continue;
    }
    if (looks_withdrawn(r.abstract)) {
      ++log.withdrawn;
      continue;
    }
    r.word_count = count_words(r.abstract);
    if (r.word_count < policy.min_abstract_words) {
      ++log.short_abstracts;
      continue;
    }
    kept.push_back(std::move(r));
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& r : kept) {
    for (const auto& c : r.categories) ++counts[c];
  }
  std::set<std::string> rare;
  for (const auto& [code, count] : counts) {
    if (count < policy.min_category_count) rare.insert(code);
  }

  Corpus corpus;
  corpus.policy = policy;
  for (auto& r : kept) {
    const auto before = r.categories.size();
    std::erase_if(r.categories, [&](const std::string& c) { return rare.contains(c); });
    log.stripped_labels += before - r.categories.size();
    if (r.categories.empty()) {
      ++log.unlabeled_records;
      continue;
    }
    for (const auto& c : r.categories) ++corpus.category_counts[c];
    corpus.records.push_back(std::move(r));
  }
  log.stripped_categories.assign(rare.begin(), rare.end());
  log.kept = corpus.records.size();
  corpus.provenance = std::move(log);
  return corpus;
}

inline Corpus load_corpus(const std::filesystem::path& path, const FilterPolicy& policy = {}) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file '" + path.string() + "'");
  FilterLog log;
  auto records = parse_records(in, log);
  if (in.bad()) throw std::runtime_error("read error on '" + path.string() + "'");
  Corpus corpus = apply_filters(std::move(records), policy, std::move(log));
  if (corpus.records.empty()) {
    throw std::runtime_error("corpus '" + path.string() + "' is empty after filtering");
  }
  return corpus;
}

/// Restricts a corpus to the given ids (kept in corpus order). Counts are recomputed.
inline Corpus restrict_to(const Corpus& corpus, const std::vector<std::string>& ids) {
  const std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  Corpus out;
  out.policy = corpus.policy;
  out.provenance = corpus.provenance;
  for (const auto& r : corpus.records) {
    if (!wanted.contains(r.id)) continue;
    for (const auto& c : r.categories) ++out.category_counts[c];
    out.records.push_back(r);
  }
  out.provenance.kept = out.records.size();
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

namespace detail {

/// Linear interpolation between closest ranks on sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

inline LengthStats length_stats(const Corpus& corpus) {
  if (corpus.records.empty()) throw std::invalid_argument("length_stats: empty corpus");
  std::vector<double> counts;
  counts.reserve(corpus.records.size());
  for (const auto& r : corpus.records) counts.push_back(static_cast<double>(r.word_count));
  std::sort(counts.begin(), counts.end());

  LengthStats s;
  s.n = counts.size();
  double sum = 0;
  for (double c : counts) sum += c;
  s.mean = sum / static_cast<double>(s.n);
  double squares = 0;
  for (double c : counts) squares += (c - s.mean) * (c - s.mean);
  s.std = std::sqrt(squares / static_cast<double>(s.n));
  s.min = counts.front();
  s.max = counts.back();
  s.q25 = detail::quantile_sorted(counts, 0.25);
  s.q50 = detail::quantile_sorted(counts, 0.50);
  s.q75 = detail::quantile_sorted(counts, 0.75);
  return s;
}

inline CategoryHistograms category_histograms(const Corpus& corpus) {
  CategoryHistograms h;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : corpus.records) {
    for (const auto& c : r.categories) ++counts[c];
    ++h.multiplicity[r.categories.size()];
  }
  h.ranked.assign(counts.begin(), counts.end());
  std::stable_sort(h.ranked.begin(), h.ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return h;
}

// ---------------------------------------------------------------------------
// Splits

/// Seeded shuffle; first ceil(10%) -> test, next ceil(18%) -> val, rest -> train.
inline SplitIndex split_ids(std::vector<std::string> ids, std::uint64_t seed) {
  const std::size_t n = ids.size();
  if (n < 10) {
    throw std::invalid_argument("split: need at least 10 records, got " + std::to_string(n));
  }
  Rng rng(seed);
  shuffle(ids, rng);
  const std::size_t n_test = (n * 10 + 99) / 100;
  const std::size_t n_val = (n * 18 + 99) / 100;
  SplitIndex s;
  s.seed = seed;
  s.test_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test),
                   ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), ids.end());
  return s;
}

inline SplitIndex split(const Corpus& corpus, std::uint64_t seed) { return split_ids(corpus.ids(), seed); }

// ---------------------------------------------------------------------------
// Persistence (corpus.atlas and split.json)

inline std::string serialize_corpus(const Corpus& corpus) {
  nlohmann::ordered_json doc;
  doc["format"] = "corpus-atlas/1";
  doc["policy"] = {{"min_abstract_words", corpus.policy.min_abstract_words},
                   {"min_category_count", corpus.policy.min_category_count}};
  const auto& log = corpus.provenance;
  doc["provenance"] = {{"input_lines", log.input_lines},
                       {"malformed", log.malformed},
                       {"duplicates", log.duplicates},
                       {"withdrawn", log.withdrawn},
                       {"short_abstracts", log.short_abstracts},
                       {"stripped_categories", log.stripped_categories},
                       {"stripped_labels", log.stripped_labels},
                       {"unlabeled_records", log.unlabeled_records},
                       {"kept", log.kept},
                       {"messages", log.messages}};
  auto& records = doc["records"] = nlohmann::ordered_json::array();
  for (const auto& r : corpus.records) {
    records.push_back({{"id", r.id}, {"categories", r.categories}, {"abstract", r.abstract}});
  }
  return doc.dump(1) + "\n";
}

inline void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  io::write_file(path, serialize_corpus(corpus));
}

inline Corpus load_atlas(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + path.string() + "' is not a corpus atlas: " + e.what());
  }
  if (doc.value("format", "") != "corpus-atlas/1") {
    throw std::runtime_error("'" + path.string() + "' is not a corpus atlas (format tag)");
  }
  Corpus corpus;
  try {
    corpus.policy.min_abstract_words = doc.at("policy").at("min_abstract_words");
    corpus.policy.min_category_count = doc.at("policy").at("min_category_count");
    const auto& p = doc.at("provenance");
    auto& log = corpus.provenance;
    log.input_lines = p.at("input_lines");
    log.malformed = p.at("malformed");
    log.duplicates = p.at("duplicates");
    log.withdrawn = p.at("withdrawn");
    log.short_abstracts = p.at("short_abstracts");
    log.stripped_categories = p.at("stripped_categories").get<std::vector<std::string>>();
    log.stripped_labels = p.at("stripped_labels");
    log.unlabeled_records = p.at("unlabeled_records");
    log.kept = p.at("kept");
    log.messages = p.at("messages").get<std::vector<std::string>>();
    std::unordered_set<std::string> seen;
    for (const auto& r : doc.at("records")) {
      PaperRecord record;
      record.id = r.at("id").get<std::string>();
      record.abstract = r.at("abstract").get<std::string>();
      record.categories = r.at("categories").get<std::vector<std::string>>();
      record.word_count = count_words(record.abstract);
      if (!seen.insert(record.id).second) {
        throw std::runtime_error("duplicate id '" + record.id + "'");
      }
      for (const auto& c : record.categories) ++corpus.category_counts[c];
      corpus.records.push_back(std::move(record));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt corpus atlas '" + path.string() + "': " + e.what());
  }
  return corpus;
}

inline void save_split(const SplitIndex& s, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["seed"] = s.seed;
  doc["train"] = s.train_ids;
  doc["val"] = s.val_ids;
  doc["test"] = s.test_ids;
  io::write_file(path, doc.dump(1) + "\n");
}

inline SplitIndex load_split(const std::filesystem::path& path) {
  try {
    const auto doc = nlohmann::json::parse(io::read_file(path));
    SplitIndex s;
    s.seed = doc.at("seed");
    s.train_ids = doc.at("train").get<std::vector<std::string>>();
    s.val_ids = doc.at("val").get<std::vector<std::string>>();
    s.test_ids = doc.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("corrupt split file '" + path.string() + "': " + e.what());
  }
}

}  // namespace corpus_atlas::corpus
