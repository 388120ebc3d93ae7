#pragma once

// Silhouette scoring and the k sweep that picks the number of categories.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "corpus_atlas/cluster.hpp"
#include "corpus_atlas/io.hpp"
#include "corpus_atlas/matrix.hpp"
#include "corpus_atlas/random.hpp"

namespace corpus_atlas::modelsel {

struct SilhouetteResult {
  double mean = 0;
  std::vector<double> per_sample;
};

/// Mean and per-sample silhouette with Euclidean distance. Members of
/// singleton clusters score 0; so does a point whose a and b are both 0.
template <class T>
SilhouetteResult silhouette(const Matrix<T>& x, std::span<const int> labels) {
  const std::size_t n = x.rows();
  if (labels.size() != n) {
    throw std::invalid_argument("silhouette: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(n) + " rows");
  }
  if (n < 3) throw std::invalid_argument("silhouette needs at least 3 samples");

  std::map<int, std::size_t> slot;
  for (int l : labels) slot.emplace(l, 0);
  if (slot.size() < 2) throw std::invalid_argument("silhouette needs at least 2 distinct clusters");
  std::size_t next = 0;
  for (auto& [label, index] : slot) index = next++;
  const std::size_t k = slot.size();

  std::vector<std::size_t> cluster_of(n), sizes(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    cluster_of[i] = slot[labels[i]];
    ++sizes[cluster_of[i]];
  }

  // distance_sums[i*k + c] = sum of distances from i to members of c
  std::vector<double> distance_sums(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dist = std::sqrt(squared_distance(xi, x.row(j)));
      distance_sums[i * k + cluster_of[j]] += dist;
      distance_sums[j * k + cluster_of[i]] += dist;
    }
  }

  SilhouetteResult result;
  result.per_sample.resize(n);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t own = cluster_of[i];
    double s = 0;
    if (sizes[own] > 1) {
      const double a = distance_sums[i * k + own] / static_cast<double>(sizes[own] - 1);
      double b = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        if (c != own) b = std::min(b, distance_sums[i * k + c] / static_cast<double>(sizes[c]));
      }
      const double denom = std::max(a, b);
      s = denom > 0 ? (b - a) / denom : 0.0;
    }
    result.per_sample[i] = s;
    total += s;
  }
  result.mean = total / static_cast<double>(n);
  return result;
}

/// Silhouette on a seeded subsample of at most `cap` rows (all rows when n <= cap).
template <class T>
SilhouetteResult silhouette_capped(const Matrix<T>& x, std::span<const int> labels, std::size_t cap,
                                   std::uint64_t seed) {
  if (cap == 0 || x.rows() <= cap) return silhouette(x, labels);
  const auto rows = sample_indices(x.rows(), cap, seed);
  std::vector<int> sub_labels;
  sub_labels.reserve(rows.size());
  for (std::size_t r : rows) sub_labels.push_back(labels[r]);
  return silhouette(x.select_rows(rows), std::span<const int>(sub_labels));
}

inline std::size_t count_distinct(std::span<const int> labels) {
  std::vector<int> sorted(labels.begin(), labels.end());
  std::sort(sorted.begin(), sorted.end());
  return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
}

struct SweepOptions {
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
  double rel_tol = 1e-4;
  std::size_t subsample_cap = 10000;
  bool keep_models = false;
};

struct SweepResult {
  std::vector<std::size_t> k_values;
  std::vector<double> silhouette_val;
  std::vector<double> wcss_train;
  std::size_t best_k = 0;
  std::vector<cluster::KMeansModel> per_k_models;  // filled when keep_models
  std::vector<std::string> warnings;
};

inline std::vector<std::size_t> k_range(std::size_t kmin, std::size_t kmax) {
  if (kmin < 2 || kmax < kmin) {
    throw std::invalid_argument("k range must satisfy 2 <= kmin <= kmax, got " + std::to_string(kmin) +
                                ".." + std::to_string(kmax));
  }
  std::vector<std::size_t> ks;
  for (std::size_t k = kmin; k <= kmax; ++k) ks.push_back(k);
  return ks;
}

/// argmax of the silhouette; ties go to the smaller k.
inline std::size_t select_best(std::span<const std::size_t> k_values, std::span<const double> scores) {
  if (k_values.empty() || k_values.size() != scores.size()) {
    throw std::invalid_argument("select_best: empty or inconsistent sweep");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < k_values.size(); ++i) {
    if (scores[i] > scores[best] || (scores[i] == scores[best] && k_values[i] < k_values[best])) best = i;
  }
  return k_values[best];
}

inline std::size_t select_best(const SweepResult& sweep) {
  return select_best(sweep.k_values, sweep.silhouette_val);
}

/// Fits on train for each k, labels validation by nearest centroid and scores
/// those labels. Training WCSS is kept as an elbow diagnostic only.
template <class T>
SweepResult sweep(const Matrix<T>& x_train, const Matrix<T>& x_val, std::span<const std::size_t> k_values,
                  std::uint64_t seed, const SweepOptions& options = {}) {
  if (x_train.cols() != x_val.cols()) {
    throw std::invalid_argument("sweep: train has " + std::to_string(x_train.cols()) +
                                " columns, validation has " + std::to_string(x_val.cols()));
  }
  SweepResult result;
  for (const std::size_t k : k_values) {
    if (k > x_train.rows()) {
      result.warnings.push_back("k=" + std::to_string(k) + " skipped: exceeds training rows (" +
                                std::to_string(x_train.rows()) + ")");
      continue;
    }
    cluster::KMeansParams params{k, seed, options.n_init, options.max_iter, options.rel_tol};
    auto model = cluster::fit(x_train, params);
    const auto predicted = cluster::predict(model, x_val);
    double score = 0;
    if (count_distinct(predicted) < 2) {
      result.warnings.push_back("k=" + std::to_string(k) +
                                ": validation rows fall in a single cluster; silhouette set to 0");
    } else {
      score = silhouette_capped(x_val, std::span<const int>(predicted), options.subsample_cap,
                                mix_keys(seed, k))
                  .mean;
    }
    result.k_values.push_back(k);
    result.silhouette_val.push_back(score);
    result.wcss_train.push_back(model.wcss);
    if (options.keep_models) result.per_k_models.push_back(std::move(model));
  }
  if (result.k_values.empty()) throw std::invalid_argument("sweep: no feasible k value");
  result.best_k = select_best(result);
  return result;
}

// ---------------------------------------------------------------------------
// sweep.csv and its plot companion

inline std::string sweep_csv(const SweepResult& s) {
  std::string out = "k,silhouette_val,wcss_train\n";
  for (std::size_t i = 0; i < s.k_values.size(); ++i) {
    out += std::to_string(s.k_values[i]) + "," + io::format_real(s.silhouette_val[i]) + "," +
           io::format_real(s.wcss_train[i]) + "\n";
  }
  return out;
}

/// k vs. silhouette curve followed by one marker row for the selected k.
inline std::string sweep_plot_csv(const SweepResult& s) {
  std::string out = "series,k,silhouette_val\n";
  std::size_t best = 0;
  for (std::size_t i = 0; i < s.k_values.size(); ++i) {
    out += "curve," + std::to_string(s.k_values[i]) + "," + io::format_real(s.silhouette_val[i]) + "\n";
    if (s.k_values[i] == s.best_k) best = i;
  }
  out += "best," + std::to_string(s.best_k) + "," + io::format_real(s.silhouette_val[best]) + "\n";
  return out;
}

inline SweepResult read_sweep_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != "k,silhouette_val,wcss_train") {
    throw std::runtime_error("'" + path.string() + "': not a sweep table");
  }
  SweepResult s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = io::split_csv_line(line);
    if (f.size() != 3) throw std::runtime_error("'" + path.string() + "': malformed row '" + line + "'");
    s.k_values.push_back(std::stoul(f[0]));
    s.silhouette_val.push_back(std::stod(f[1]));
    s.wcss_train.push_back(std::stod(f[2]));
  }
  s.best_k = select_best(s);
  return s;
}

}  // namespace corpus_atlas::modelsel
