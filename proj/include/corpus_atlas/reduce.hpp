#pragma once

// PCA with a variance-retention target.
//
// Principal axes come from a thin SVD of the column-centered data. The number
// of retained components is the smallest m whose cumulative explained-variance
// ratio reaches the target. Each axis is sign-normalized so that its
// largest-magnitude coordinate is positive.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "corpus_atlas/embedstore.hpp"
#include "corpus_atlas/io.hpp"
#include "corpus_atlas/matrix.hpp"

namespace corpus_atlas::reduce {

/// Slack on the cumulative-ratio comparison so that target 1.0 is reachable
/// despite rounding in the singular values.
inline constexpr double kCumulativeSlack = 1e-12;

struct PcaModel {
  std::vector<double> mean;             // length d
  Matrix<double> components;            // m x d, orthonormal rows
  std::vector<double> explained_ratio;  // length m, non-increasing
  double variance_target = 0.95;
  double total_variance = 0;  // sum of column sample variances (n-1 denominator)
  std::size_t fit_rows = 0;

  std::size_t retained() const noexcept { return components.rows(); }
  std::size_t input_dim() const noexcept { return mean.size(); }
};

template <class T>
PcaModel fit(const Matrix<T>& x, double variance_target) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw std::invalid_argument("PCA fit needs at least 2 rows, got " + std::to_string(n));
  if (d < 1) throw std::invalid_argument("PCA fit needs at least 1 column");
  if (!(variance_target > 0.0 && variance_target <= 1.0)) {
    throw std::invalid_argument("variance target must lie in (0, 1]");
  }
  if (!all_finite(x)) throw std::invalid_argument("PCA input contains non-finite values");

  PcaModel model;
  model.variance_target = variance_target;
  model.fit_rows = n;
  model.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) model.mean[j] += static_cast<double>(row[j]);
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  Eigen::MatrixXd centered(n, d);
  double sum_squares = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = static_cast<double>(row[j]) - model.mean[j];
      centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      sum_squares += v * v;
    }
  }
  const double dof = static_cast<double>(n - 1);
  model.total_variance = sum_squares / dof;
  if (!(model.total_variance > 0.0)) {
    throw std::invalid_argument("PCA input has zero variance (all rows identical)");
  }

  const Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& singular = svd.singularValues();
  const Eigen::MatrixXd& axes = svd.matrixV();
  const auto available = static_cast<std::size_t>(singular.size());

  std::size_t m = 0;
  double cumulative = 0;
  std::vector<double> ratios;
  while (m < available) {
    const double s = singular(static_cast<Eigen::Index>(m));
    const double ratio = s * s / dof / model.total_variance;
    if (!(ratio > 0.0)) break;
    ratios.push_back(ratio);
    cumulative += ratio;
    ++m;
    if (cumulative >= variance_target - kCumulativeSlack) break;
  }
  if (m == 0) throw std::invalid_argument("PCA input has zero variance (all rows identical)");

  model.explained_ratio = std::move(ratios);
  model.components = Matrix<double>(m, d);
  for (std::size_t c = 0; c < m; ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    std::size_t pivot = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(axes(static_cast<Eigen::Index>(j), col)) >
          std::abs(axes(static_cast<Eigen::Index>(pivot), col))) {
        pivot = j;
      }
    }
    const double sign = axes(static_cast<Eigen::Index>(pivot), col) < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      model.components(c, j) = sign * axes(static_cast<Eigen::Index>(j), col);
    }
  }
  return model;
}

inline PcaModel fit(const embedstore::EmbeddingMatrix& x, double variance_target) {
  return fit(x.values, variance_target);
}

/// (x - mean) projected onto the retained components; n x m.
template <class T>
Matrix<double> transform(const PcaModel& model, const Matrix<T>& x) {
  const std::size_t d = model.input_dim();
  if (x.cols() != d) {
    throw std::invalid_argument("PCA transform: input has " + std::to_string(x.cols()) +
                                " columns, model expects " + std::to_string(d));
  }
  const std::size_t m = model.retained();
  Matrix<double> out(x.rows(), m);
  std::vector<double> centered(d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) centered[j] = static_cast<double>(row[j]) - model.mean[j];
    for (std::size_t c = 0; c < m; ++c) {
      const auto axis = model.components.row(c);
      double dot = 0;
      for (std::size_t j = 0; j < d; ++j) dot += centered[j] * axis[j];
      out(i, c) = dot;
    }
  }
  return out;
}

inline embedstore::EmbeddingMatrix transform(const PcaModel& model, const embedstore::EmbeddingMatrix& x) {
  embedstore::EmbeddingMatrix out;
  out.values = transform(model, x.values).cast<float>();
  out.ids = x.ids;
  out.variant = x.variant.starts_with("pca-") ? x.variant : "pca-" + x.variant;
  return out;
}

/// Maps reduced coordinates back to the input space.
inline Matrix<double> inverse_transform(const PcaModel& model, const Matrix<double>& reduced) {
  const std::size_t d = model.input_dim();
  Matrix<double> out(reduced.rows(), d);
  for (std::size_t i = 0; i < reduced.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = model.mean[j];
    for (std::size_t c = 0; c < model.retained(); ++c) {
      const auto axis = model.components.row(c);
      for (std::size_t j = 0; j < d; ++j) row[j] += reduced(i, c) * axis[j];
    }
  }
  return out;
}

inline std::vector<double> explained_curve(const PcaModel& model) {
  std::vector<double> curve;
  curve.reserve(model.explained_ratio.size());
  double running = 0;
  for (double r : model.explained_ratio) {
    running += r;
    curve.push_back(running);
  }
  return curve;
}

// pca.json: every real written with 17 significant digits.
inline std::string serialize_model(const PcaModel& model) {
  auto list = [](std::span<const double> values) {
    std::string s = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) s += ",";
      s += io::format_real(values[i]);
    }
    return s + "]";
  };
  std::ostringstream out;
  out << "{\n";
  out << " \"format\": \"pca/1\",\n";
  out << " \"input_dim\": " << model.input_dim() << ",\n";
  out << " \"retained\": " << model.retained() << ",\n";
  out << " \"variance_target\": " << io::format_real(model.variance_target) << ",\n";
  out << " \"total_variance\": " << io::format_real(model.total_variance) << ",\n";
  out << " \"fit_rows\": " << model.fit_rows << ",\n";
  out << " \"mean\": " << list(model.mean) << ",\n";
  out << " \"explained_ratio\": " << list(model.explained_ratio) << ",\n";
  out << " \"components\": [";
  for (std::size_t c = 0; c < model.retained(); ++c) {
    out << (c ? ",\n  " : "\n  ") << list(model.components.row(c));
  }
  out << "\n ]\n}\n";
  return out.str();
}

inline void save_model(const PcaModel& model, const std::filesystem::path& path) {
  io::write_file(path, serialize_model(model));
}

inline PcaModel load_model(const std::filesystem::path& path) {
  try {
    const auto doc = nlohmann::json::parse(io::read_file(path));
    if (doc.value("format", "") != "pca/1") throw std::runtime_error("format tag is not pca/1");
    PcaModel model;
    model.mean = doc.at("mean").get<std::vector<double>>();
    model.explained_ratio = doc.at("explained_ratio").get<std::vector<double>>();
    model.variance_target = doc.at("variance_target");
    model.total_variance = doc.at("total_variance");
    model.fit_rows = doc.at("fit_rows");
    const auto rows = doc.at("components").get<std::vector<std::vector<double>>>();
    model.components = Matrix<double>(rows.size(), model.mean.size());
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (rows[c].size() != model.mean.size()) throw std::runtime_error("component width mismatch");
      std::copy(rows[c].begin(), rows[c].end(), model.components.row(c).begin());
    }
    if (model.explained_ratio.size() != rows.size()) throw std::runtime_error("ratio count mismatch");
    return model;
  } catch (const std::exception& e) {
    throw std::runtime_error("cannot load PCA model '" + path.string() + "': " + e.what());
  }
}

}  // namespace corpus_atlas::reduce
