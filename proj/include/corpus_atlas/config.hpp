#pragma once

// Reader for the TOML subset used by pipeline configuration files:
// [section] headers, `key = value` pairs, '#' comments, and values that are
// strings, integers, reals, booleans or single-line arrays of strings.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace corpus_atlas::config {

using Value = std::variant<bool, std::int64_t, double, std::string, std::vector<std::string>>;

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Document {
 public:
  static Document parse(std::string_view text, std::string_view source = "<config>");

  bool contains(std::string_view key) const { return values_.find(std::string(key)) != values_.end(); }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
  }

  std::string get_string(std::string_view key, std::string fallback) const {
    const Value* v = find(key);
    if (!v) return fallback;
    if (const auto* s = std::get_if<std::string>(v)) return *s;
    throw type_error(key, "a string");
  }

  std::int64_t get_int(std::string_view key, std::int64_t fallback) const {
    const Value* v = find(key);
    if (!v) return fallback;
    if (const auto* i = std::get_if<std::int64_t>(v)) return *i;
    throw type_error(key, "an integer");
  }

  std::uint64_t get_count(std::string_view key, std::uint64_t fallback) const {
    const std::int64_t v = get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw std::runtime_error("config key '" + std::string(key) + "' must be non-negative");
    return static_cast<std::uint64_t>(v);
  }

  double get_real(std::string_view key, double fallback) const {
    const Value* v = find(key);
    if (!v) return fallback;
    if (const auto* d = std::get_if<double>(v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(v)) return static_cast<double>(*i);
    throw type_error(key, "a number");
  }

  bool get_bool(std::string_view key, bool fallback) const {
    const Value* v = find(key);
    if (!v) return fallback;
    if (const auto* b = std::get_if<bool>(v)) return *b;
    throw type_error(key, "a boolean");
  }

  /// Accepts either an array of strings or a single string.
  std::vector<std::string> get_strings(std::string_view key) const {
    const Value* v = find(key);
    if (!v) return {};
    if (const auto* a = std::get_if<std::vector<std::string>>(v)) return *a;
    if (const auto* s = std::get_if<std::string>(v)) return {*s};
    throw type_error(key, "a string or array of strings");
  }

 private:
  const Value* find(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    return it == values_.end() ? nullptr : &it->second;
  }

  static std::runtime_error type_error(std::string_view key, std::string_view expected) {
    return std::runtime_error("config key '" + std::string(key) + "' must be " + std::string(expected));
  }

  std::map<std::string, Value> values_;
};

namespace detail {

class LineParser {
 public:
  LineParser(std::string_view line, std::string where) : s_(line), where_(std::move(where)) {}

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  bool at_end_or_comment() {
    skip_space();
    return pos_ >= s_.size() || s_[pos_] == '#' || s_[pos_] == '\r';
  }

  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

  bool consume(char c) {
    skip_space();
    if (peek() != c) return false;
    ++pos_;
    return true;
  }

  std::string name() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < s_.size()) {
      const char c = s_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.') {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }

  std::string string_literal() {
    skip_space();
    const char quote = peek();
    if (quote != '"' && quote != '\'') fail("expected a quoted string");
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != quote) {
      char c = s_[pos_++];
      if (quote == '"' && c == '\\') {
        if (pos_ >= s_.size()) fail("dangling escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '\\': c = '\\'; break;
          case '"': c = '"'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out += c;
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  Value value() {
    skip_space();
    const char c = peek();
    if (c == '"' || c == '\'') return string_literal();
    if (c == '[') {
      ++pos_;
      std::vector<std::string> items;
      if (consume(']')) return items;
      for (;;) {
        items.push_back(string_literal());
        if (consume(']')) break;
        if (!consume(',')) fail("expected ',' or ']' in array");
        if (consume(']')) break;  // trailing comma
      }
      return items;
    }
    const std::size_t start = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_])) && s_[pos_] != '#') ++pos_;
    std::string token(s_.substr(start, pos_ - start));
    if (token == "true") return true;
    if (token == "false") return false;
    std::erase(token, '_');
    if (token.empty()) fail("missing value");
    try {
      std::size_t used = 0;
      if (token.find_first_of(".eE") == std::string::npos || token.starts_with("0x")) {
        const long long v = std::stoll(token, &used, 0);
        if (used == token.size()) return static_cast<std::int64_t>(v);
      } else {
        const double v = std::stod(token, &used);
        if (used == token.size()) return v;
      }
    } catch (const std::exception&) {
    }
    fail("cannot parse value '" + token + "'");
  }

  [[noreturn]] void fail(const std::string& why) const { throw ParseError(where_ + ": " + why); }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
  std::string where_;
};

}  // namespace detail

inline Document Document::parse(std::string_view text, std::string_view source) {
  Document doc;
  std::string section;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    detail::LineParser p(line, std::string(source) + ":" + std::to_string(line_no));
    if (p.at_end_or_comment()) continue;
    if (p.consume('[')) {
      section = p.name();
      if (!p.consume(']')) p.fail("expected ']'");
      if (!p.at_end_or_comment()) p.fail("unexpected text after section header");
      continue;
    }
    const std::string key = p.name();
    if (!p.consume('=')) p.fail("expected '=' after key '" + key + "'");
    Value v = p.value();
    if (!p.at_end_or_comment()) p.fail("unexpected text after value");
    const std::string full = section.empty() ? key : section + "." + key;
    if (!doc.values_.emplace(full, std::move(v)).second) p.fail("duplicate key '" + full + "'");
  }
  return doc;
}

}  // namespace corpus_atlas::config
