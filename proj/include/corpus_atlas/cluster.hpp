#pragma once

// K-Means: k-means++ seeding, Lloyd iterations, seeded restarts.
//
// Determinism contract: for a fixed (x, params) the model is bit-identical.
// All reductions run in row order; ties in assignment go to the lowest
// centroid index.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "corpus_atlas/io.hpp"
#include "corpus_atlas/matrix.hpp"
#include "corpus_atlas/random.hpp"

namespace corpus_atlas::cluster {

struct KMeansParams {
  std::size_t k = 2;
  std::uint64_t seed = 0;
  std::size_t n_init = 10;
  std::size_t max_iter = 300;
  double rel_tol = 1e-4;  // on relative WCSS improvement
};

struct KMeansModel {
  Matrix<double> centroids;  // k x m
  std::size_t k = 0;
  double wcss = 0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  std::size_t n_init = 0;
  std::vector<double> wcss_trace;  // best restart: WCSS after every assignment step

  std::size_t dim() const noexcept { return centroids.cols(); }
};

struct KMeansFit {
  KMeansModel model;
  std::vector<int> labels;                         // final assignment of the best restart
  std::vector<std::vector<double>> restart_traces;  // one WCSS trace per restart
};

namespace detail {

inline void check_params(const KMeansParams& p) {
  if (p.k < 2) throw std::invalid_argument("k-means needs k >= 2, got " + std::to_string(p.k));
  if (p.n_init < 1) throw std::invalid_argument("k-means needs n_init >= 1");
  if (p.max_iter < 1) throw std::invalid_argument("k-means needs max_iter >= 1");
  if (!(p.rel_tol > 0)) throw std::invalid_argument("k-means needs rel_tol > 0");
}

/// Nearest centroid (lowest index on ties) and its squared distance.
template <class T>
std::pair<int, double> nearest(std::span<const T> point, const Matrix<double>& centroids) {
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.rows(); ++j) {
    const double d2 = squared_distance(point, centroids.row(j));
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(j);
    }
  }
  return {best, best_d2};
}

template <class T>
double assign(const Matrix<T>& x, const Matrix<double>& centroids, std::vector<int>& labels,
              std::vector<double>& dist2) {
  double total = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto [label, d2] = nearest(x.row(i), centroids);
    labels[i] = label;
    dist2[i] = d2;
    total += d2;
  }
  return total;
}

/// Centroids as assignment means. An empty cluster takes over the point
/// farthest from its own centroid (taken from a cluster with >1 member).
template <class T>
void update(const Matrix<T>& x, std::vector<int>& labels, std::vector<double>& dist2,
            Matrix<double>& centroids) {
  const std::size_t k = centroids.rows();
  std::vector<std::size_t> counts(k, 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] != 0) continue;
    std::size_t far = x.rows();
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (counts[static_cast<std::size_t>(labels[i])] < 2) continue;
      if (far == x.rows() || dist2[i] > dist2[far]) far = i;
    }
    if (far == x.rows()) break;  // unreachable while n >= k
    --counts[static_cast<std::size_t>(labels[far])];
    labels[far] = static_cast<int>(j);
    dist2[far] = 0;
    counts[j] = 1;
  }

  centroids = Matrix<double>(k, x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto c = centroids.row(static_cast<std::size_t>(labels[i]));
    const auto p = x.row(i);
    for (std::size_t t = 0; t < p.size(); ++t) c[t] += static_cast<double>(p[t]);
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    for (double& v : centroids.row(j)) v /= static_cast<double>(counts[j]);
  }
}

}  // namespace detail

/// k-means++ seeding: first centroid uniform, then D^2-weighted draws.
template <class T>
Matrix<double> kmeanspp_init(const Matrix<T>& x, std::size_t k, std::uint64_t seed) {
  const std::size_t n = x.rows();
  if (k == 0) throw std::invalid_argument("kmeans++: k must be positive");
  if (k > n) {
    throw std::invalid_argument("kmeans++: k=" + std::to_string(k) + " exceeds row count " +
                                std::to_string(n));
  }
  Rng rng(seed);
  Matrix<double> centroids(k, x.cols());
  std::vector<bool> chosen(n, false);
  auto take = [&](std::size_t c, std::size_t row) {
    chosen[row] = true;
    const auto src = x.row(row);
    auto dst = centroids.row(c);
    for (std::size_t t = 0; t < src.size(); ++t) dst[t] = static_cast<double>(src[t]);
  };

  take(0, rng.index(n));
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(x.row(i), centroids.row(0));

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0;
    for (double v : d2) total += v;
    std::size_t pick = n;
    if (total > 0) {
      const double target = rng.uniform() * total;
      double running = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0) continue;
        running += d2[i];
        pick = i;
        if (running > target) break;
      }
    } else {
      // Remaining rows all coincide with chosen centroids: pick an unused row.
      std::size_t remaining = 0;
      for (bool b : chosen) remaining += b ? 0 : 1;
      std::size_t r = rng.index(remaining);
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        if (r-- == 0) {
          pick = i;
          break;
        }
      }
    }
    take(c, pick);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(x.row(i), centroids.row(c)));
    }
  }
  return centroids;
}

template <class T>
KMeansFit fit_detailed(const Matrix<T>& x, const KMeansParams& params) {
  detail::check_params(params);
  const std::size_t n = x.rows();
  if (n < params.k) {
    throw std::invalid_argument("k-means: k=" + std::to_string(params.k) + " exceeds row count " +
                                std::to_string(n));
  }
  if (!all_finite(x)) throw std::invalid_argument("k-means input contains non-finite values");

  KMeansFit best;
  best.model.wcss = std::numeric_limits<double>::infinity();
  std::vector<int> labels(n);
  std::vector<double> dist2(n);

  for (std::size_t restart = 0; restart < params.n_init; ++restart) {
    Matrix<double> centroids = kmeanspp_init(x, params.k, mix_keys(params.seed, restart));
    std::vector<double> trace{detail::assign(x, centroids, labels, dist2)};
    std::size_t iterations = 0;
    while (iterations < params.max_iter) {
      detail::update(x, labels, dist2, centroids);
      const double previous = trace.back();
      const double current = detail::assign(x, centroids, labels, dist2);
      trace.push_back(current);
      ++iterations;
      if (previous <= 0 || (previous - current) / previous < params.rel_tol) break;
    }
    const double final_wcss = trace.back();
    best.restart_traces.push_back(trace);
    if (final_wcss < best.model.wcss) {
      best.model.centroids = std::move(centroids);
      best.model.wcss = final_wcss;
      best.model.iterations = iterations;
      best.model.wcss_trace = std::move(trace);
      best.labels = labels;
    }
  }
  best.model.k = params.k;
  best.model.seed = params.seed;
  best.model.n_init = params.n_init;
  return best;
}

template <class T>
KMeansModel fit(const Matrix<T>& x, const KMeansParams& params) {
  return fit_detailed(x, params).model;
}

template <class T>
std::vector<int> predict(const KMeansModel& model, const Matrix<T>& x) {
  if (x.cols() != model.dim()) {
    throw std::invalid_argument("k-means predict: input has " + std::to_string(x.cols()) +
                                " columns, model expects " + std::to_string(model.dim()));
  }
  std::vector<int> labels(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) labels[i] = detail::nearest(x.row(i), model.centroids).first;
  return labels;
}

template <class T>
double wcss(const KMeansModel& model, const Matrix<T>& x) {
  if (x.cols() != model.dim()) {
    throw std::invalid_argument("k-means wcss: input has " + std::to_string(x.cols()) +
                                " columns, model expects " + std::to_string(model.dim()));
  }
  double total = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) total += detail::nearest(x.row(i), model.centroids).second;
  return total;
}

// ---------------------------------------------------------------------------
// model.kmeans and labels.csv

inline std::string serialize_model(const KMeansModel& model) {
  std::ostringstream out;
  out << "{\n \"format\": \"kmeans/1\",\n";
  out << " \"k\": " << model.k << ",\n";
  out << " \"dim\": " << model.dim() << ",\n";
  out << " \"seed\": " << model.seed << ",\n";
  out << " \"n_init\": " << model.n_init << ",\n";
  out << " \"iterations\": " << model.iterations << ",\n";
  out << " \"wcss\": " << io::format_real(model.wcss) << ",\n";
  out << " \"centroids\": [";
  for (std::size_t j = 0; j < model.centroids.rows(); ++j) {
    out << (j ? ",\n  [" : "\n  [");
    const auto row = model.centroids.row(j);
    for (std::size_t t = 0; t < row.size(); ++t) out << (t ? "," : "") << io::format_real(row[t]);
    out << "]";
  }
  out << "\n ]\n}\n";
  return out.str();
}

inline void save_model(const KMeansModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_model(model));
}

inline KMeansModel load_model(const std::filesystem::path& path) {
  try {
    const auto doc = nlohmann::json::parse(io::read_file(path));
    if (doc.value("format", "") != "kmeans/1") throw std::runtime_error("format tag is not kmeans/1");
    KMeansModel model;
    model.k = doc.at("k");
    model.seed = doc.at("seed");
    model.n_init = doc.at("n_init");
    model.iterations = doc.at("iterations");
    model.wcss = doc.at("wcss");
    const std::size_t dim = doc.at("dim");
    const auto rows = doc.at("centroids").get<std::vector<std::vector<double>>>();
    if (rows.size() != model.k) throw std::runtime_error("centroid count does not match k");
    model.centroids = Matrix<double>(model.k, dim);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].size() != dim) throw std::runtime_error("centroid width does not match dim");
      std::copy(rows[j].begin(), rows[j].end(), model.centroids.row(j).begin());
    }
    return model;
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot load k-means model '" + path.string() + "': " + e.what());
  }
}

using LabelTable = std::vector<std::pair<std::string, int>>;

inline void write_labels_csv(const LabelTable& labels, const std::filesystem::path& path) {
  std::string out = "id,cluster\n";
  for (const auto& [id, cluster] : labels) out += io::csv_field(id) + "," + std::to_string(cluster) + "\n";
  io::write_file(path, out);
}

inline LabelTable read_labels_csv(const std::filesystem::path& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line) || io::split_csv_line(line) != std::vector<std::string>{"id", "cluster"}) {
    throw std::runtime_error("'" + path.string() + "': expected header 'id,cluster'");
  }
  LabelTable labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = io::split_csv_line(line);
    int cluster = 0;
    std::size_t used = 0;
    try {
      if (fields.size() != 2) throw std::invalid_argument("field count");
      cluster = std::stoi(fields[1], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != fields[1].size()) {
      throw std::runtime_error("'" + path.string() + "' line " + std::to_string(line_no) +
                               ": expected 'id,cluster'");
    }
    labels.emplace_back(fields[0], cluster);
  }
  return labels;
}

}  // namespace corpus_atlas::cluster
