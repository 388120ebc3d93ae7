#pragma once

// Cluster-to-category relation: cross-tabulation, top categories per cluster
// and macro-category purity.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpus_atlas/cluster.hpp"
#include "corpus_atlas/corpus.hpp"
#include "corpus_atlas/io.hpp"
#include "corpus_atlas/matrix.hpp"

namespace corpus_atlas::report {

/// counts(r, c): papers of cluster `clusters[r]` carrying `categories[c]`.
/// A paper with m categories contributes to m cells.
struct CrossTab {
  std::vector<int> clusters;             // ascending
  std::vector<std::string> categories;   // ascending
  std::vector<std::size_t> cluster_sizes;  // papers per cluster
  Matrix<std::size_t> counts;

  std::size_t count(int cluster, std::string_view category) const {
    const auto r = std::lower_bound(clusters.begin(), clusters.end(), cluster);
    const auto c = std::lower_bound(categories.begin(), categories.end(), category);
    if (r == clusters.end() || *r != cluster || c == categories.end() || *c != category) return 0;
    return counts(static_cast<std::size_t>(r - clusters.begin()), static_cast<std::size_t>(c - categories.begin()));
  }

  bool operator==(const CrossTab&) const = default;
};

struct CategoryCount {
  std::string category;
  std::size_t count = 0;
  bool operator==(const CategoryCount&) const = default;
};

struct ClusterTop {
  int cluster = 0;
  std::size_t size = 0;
  std::vector<CategoryCount> entries;
};

struct MacroPurity {
  std::vector<std::vector<std::string>> macro_profile;  // parallel to the ClusterTop list
  std::size_t clusters_counted = 0;                    // clusters with a non-empty top list
  double one = 0, two = 0, three_plus = 0;
};

struct ClusterReport {
  CrossTab crosstab;
  std::vector<ClusterTop> top;
  MacroPurity purity;
  std::size_t top_n = 3;
  std::size_t min_count = 10;
};

/// `known_clusters` adds rows for clusters that may have no labeled paper.
inline CrossTab crosstab(const cluster::LabelTable& labels, const corpus::Corpus& corpus,
                         std::span<const int> known_clusters = {}) {
  std::unordered_map<std::string_view, const corpus::PaperRecord*> by_id;
  for (const auto& r : corpus.records) by_id.emplace(r.id, &r);

  std::set<int> clusters(known_clusters.begin(), known_clusters.end());
  std::set<std::string> categories;
  for (const auto& [id, cluster] : labels) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("crosstab: unknown id '" + id + "'");
    clusters.insert(cluster);
    categories.insert(it->second->categories.begin(), it->second->categories.end());
  }

  CrossTab t;
  t.clusters.assign(clusters.begin(), clusters.end());
  t.categories.assign(categories.begin(), categories.end());
  t.cluster_sizes.assign(t.clusters.size(), 0);
  t.counts = Matrix<std::size_t>(t.clusters.size(), t.categories.size(), 0);
  for (const auto& [id, cluster] : labels) {
    const auto row = static_cast<std::size_t>(
        std::lower_bound(t.clusters.begin(), t.clusters.end(), cluster) - t.clusters.begin());
    ++t.cluster_sizes[row];
    for (const auto& category : by_id.at(id)->categories) {
      const auto col = static_cast<std::size_t>(
          std::lower_bound(t.categories.begin(), t.categories.end(), category) - t.categories.begin());
      ++t.counts(row, col);
    }
  }
  return t;
}

/// Per cluster: categories with count >= min_count, count desc then code asc,
/// truncated to top_n. Clusters ordered by decreasing size, then id.
inline std::vector<ClusterTop> top_categories(const CrossTab& t, std::size_t top_n = 3, std::size_t min_count = 10) {
  std::vector<ClusterTop> out;
  for (std::size_t r = 0; r < t.clusters.size(); ++r) {
    ClusterTop top{t.clusters[r], t.cluster_sizes[r], {}};
    for (std::size_t c = 0; c < t.categories.size(); ++c) {
      if (t.counts(r, c) >= min_count && t.counts(r, c) > 0) top.entries.push_back({t.categories[c], t.counts(r, c)});
    }
    std::stable_sort(top.entries.begin(), top.entries.end(),
                     [](const CategoryCount& a, const CategoryCount& b) { return a.count > b.count; });
    if (top.entries.size() > top_n) top.entries.resize(top_n);
    out.push_back(std::move(top));
  }
  std::stable_sort(out.begin(), out.end(), [](const ClusterTop& a, const ClusterTop& b) { return a.size > b.size; });
  return out;
}

using MacroFn = std::function<std::string(std::string_view)>;

/// Fractions of clusters whose surviving top entries span exactly 1, exactly 2
/// and 3+ macro-categories. Clusters with no surviving entry are left out.
inline MacroPurity macro_purity(std::span<const ClusterTop> top, const MacroFn& macro) {
  MacroPurity p;
  std::size_t one = 0, two = 0, more = 0;
  for (const auto& cluster : top) {
    std::vector<std::string> macros;
    for (const auto& e : cluster.entries) {
      auto m = macro(e.category);
      if (std::find(macros.begin(), macros.end(), m) == macros.end()) macros.push_back(std::move(m));
    }
    if (!macros.empty()) {
      ++p.clusters_counted;
      (macros.size() == 1 ? one : macros.size() == 2 ? two : more) += 1;
    }
    p.macro_profile.push_back(std::move(macros));
  }
  if (p.clusters_counted > 0) {
    const auto total = static_cast<double>(p.clusters_counted);
    p.one = static_cast<double>(one) / total;
    p.two = static_cast<double>(two) / total;
    p.three_plus = static_cast<double>(more) / total;
  }
  return p;
}

inline ClusterReport build_report(const cluster::LabelTable& labels, const corpus::Corpus& corpus,
                                  std::size_t top_n = 3, std::size_t min_count = 10,
                                  const corpus::AliasMap& aliases = corpus::default_aliases(),
                                  std::span<const int> known_clusters = {}) {
  ClusterReport r;
  r.top_n = top_n;
  r.min_count = min_count;
  r.crosstab = crosstab(labels, corpus, known_clusters);
  r.top = top_categories(r.crosstab, top_n, min_count);
  r.purity = macro_purity(r.top, [&](std::string_view c) { return corpus::macro_of(c, aliases); });
  return r;
}

// ---------------------------------------------------------------------------
// Emission

inline std::string crosstab_csv(const CrossTab& t) {
  std::string out = "cluster";
  for (const auto& c : t.categories) out += "," + io::csv_field(c);
  out += "\n";
  for (std::size_t r = 0; r < t.clusters.size(); ++r) {
    out += std::to_string(t.clusters[r]);
    for (std::size_t c = 0; c < t.categories.size(); ++c) out += "," + std::to_string(t.counts(r, c));
    out += "\n";
  }
  return out;
}

/// Parses crosstab.csv; cluster sizes are not stored there and stay zero.
inline CrossTab parse_crosstab_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("crosstab csv: empty input");
  auto header = io::split_csv_line(line);
  if (header.empty() || header.front() != "cluster") throw std::runtime_error("crosstab csv: bad header");
  CrossTab t;
  t.categories.assign(header.begin() + 1, header.end());
  std::vector<std::size_t> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != header.size()) throw std::runtime_error("crosstab csv: ragged row");
    t.clusters.push_back(std::stoi(f[0]));
    for (std::size_t c = 1; c < f.size(); ++c) values.push_back(std::stoul(f[c]));
  }
  t.cluster_sizes.assign(t.clusters.size(), 0);
  t.counts = Matrix<std::size_t>(t.clusters.size(), t.categories.size(), std::move(values));
  return t;
}

/// Aligned-text listing: one row per cluster by decreasing size, "-" for missing ranks.
inline std::string format_table(const ClusterReport& r) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Cluster", "Size"};
  static const char* const kOrdinals[] = {"1st", "2nd", "3rd"};
  for (std::size_t i = 0; i < r.top_n; ++i) {
    header.push_back((i < 3 ? std::string(kOrdinals[i]) : std::to_string(i + 1) + "th") + " most frequent");
  }
  rows.push_back(header);
  for (const auto& c : r.top) {
    std::vector<std::string> row{std::to_string(c.cluster), std::to_string(c.size)};
    for (std::size_t i = 0; i < r.top_n; ++i) {
      row.push_back(i < c.entries.size()
                        ? c.entries[i].category + " (" + std::to_string(c.entries[i].count) + ")"
                        : "-");
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::string line;
    for (std::size_t i = 0; i < rows[k].size(); ++i) {
      const auto& cell = rows[k][i];
      const std::string pad(width[i] - cell.size(), ' ');
      line += (i < 2 ? pad + cell : cell + pad);  // numbers right-aligned
      if (i + 1 < rows[k].size()) line += "  ";
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (k == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
    }
  }
  const auto& p = r.purity;
  out += "\nCategories with fewer than " + std::to_string(r.min_count) + " papers in a cluster are excluded.\n";
  out += "Macro-categories among listed entries (" + std::to_string(p.clusters_counted) + " clusters):\n";
  out += "  one:   " + io::format_fixed(100.0 * p.one, 1) + "%\n";
  out += "  two:   " + io::format_fixed(100.0 * p.two, 1) + "%\n";
  out += "  three+: " + io::format_fixed(100.0 * p.three_plus, 1) + "%\n";
  return out;
}

/// Writes table.txt, crosstab.csv, purity.csv and bars_<rank>_cluster<id>.csv
/// for the four largest clusters into `dir`.
inline std::vector<std::filesystem::path> emit_report(const ClusterReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    io::write_file(dir / name, text);
    written.push_back(dir / name);
  };
  emit("table.txt", format_table(r));
  emit("crosstab.csv", crosstab_csv(r.crosstab));

  std::string purity = "macro_categories,fraction\n";
  purity += "1," + io::format_real(r.purity.one) + "\n";
  purity += "2," + io::format_real(r.purity.two) + "\n";
  purity += "3+," + io::format_real(r.purity.three_plus) + "\n";
  emit("purity.csv", purity);

  const auto& t = r.crosstab;
  for (std::size_t rank = 0; rank < std::min<std::size_t>(4, r.top.size()); ++rank) {
    const int cluster = r.top[rank].cluster;
    const auto row = static_cast<std::size_t>(
        std::lower_bound(t.clusters.begin(), t.clusters.end(), cluster) - t.clusters.begin());
    std::vector<CategoryCount> bars;
    for (std::size_t c = 0; c < t.categories.size(); ++c) {
      if (t.counts(row, c) > 0) bars.push_back({t.categories[c], t.counts(row, c)});
    }
    std::stable_sort(bars.begin(), bars.end(),
                     [](const CategoryCount& a, const CategoryCount& b) { return a.count > b.count; });
    std::string text = "category,count\n";
    for (const auto& b : bars) text += io::csv_field(b.category) + "," + std::to_string(b.count) + "\n";
    emit("bars_" + std::to_string(rank + 1) + "_cluster" + std::to_string(cluster) + ".csv", text);
  }
  return written;
}

}  // namespace corpus_atlas::report
