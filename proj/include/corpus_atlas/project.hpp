#pragma once

// Exact O(n^2) t-SNE to two dimensions.
//
// High-dimensional affinities use per-row Gaussian bandwidths calibrated to a
// target perplexity; the low-dimensional kernel is Student-t with one degree
// of freedom. Optimization is gradient descent with momentum, per-coordinate
// gains and early exaggeration.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "corpus_atlas/matrix.hpp"
#include "corpus_atlas/random.hpp"

namespace corpus_atlas::project {

inline constexpr double kEntropyTolerance = 1e-5;  // bits
inline constexpr std::size_t kMaxBisectionSteps = 50;
inline constexpr double kAffinityFloor = 1e-12;
inline constexpr double kInitScale = 1e-4;
inline constexpr double kMinGain = 0.01;

struct TsneConfig {
  double perplexity = 30;
  std::size_t iterations = 1000;
  double learning_rate = 200;
  double early_exaggeration = 12;
  std::size_t exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  std::uint64_t seed = 0;
};

inline void validate(const TsneConfig& c, std::size_t n) {
  if (n < 4) throw std::invalid_argument("t-SNE needs at least 4 samples, got " + std::to_string(n));
  if (!(c.perplexity > 0) || !(c.perplexity < static_cast<double>(n - 1) / 3.0)) {
    throw std::invalid_argument("perplexity must be positive and below (n-1)/3 = " +
                                std::to_string(static_cast<double>(n - 1) / 3.0));
  }
  if (c.iterations < 250) throw std::invalid_argument("t-SNE needs at least 250 iterations");
  if (!(c.learning_rate > 0) || !(c.early_exaggeration > 0) || !(c.initial_momentum > 0) ||
      !(c.final_momentum > 0)) {
    throw std::invalid_argument("t-SNE rates, momenta and exaggeration must be positive");
  }
}

struct Affinities {
  Matrix<double> p;                // symmetric joint probabilities, zero diagonal
  std::vector<double> beta;        // per-row precision 1/(2 sigma^2)
  std::vector<double> entropy_bits;  // conditional entropy reached per row
};

namespace detail {

/// Entropy in bits of p_j ~ exp(-beta * shifted_j), plus the unnormalized weights.
inline double row_entropy(std::span<const double> shifted, double beta, std::vector<double>& weights) {
  double total = 0, weighted = 0;
  for (std::size_t j = 0; j < shifted.size(); ++j) {
    weights[j] = std::exp(-beta * shifted[j]);
    total += weights[j];
    weighted += weights[j] * shifted[j];
  }
  return (std::log(total) + beta * weighted / total) / std::numbers::ln2;
}

}  // namespace detail

template <class T>
Affinities calibrate_affinities(const Matrix<T>& x, double perplexity) {
  const std::size_t n = x.rows();
  if (n < 4) throw std::invalid_argument("t-SNE needs at least 4 samples, got " + std::to_string(n));
  if (!(perplexity > 0) || !(perplexity < static_cast<double>(n - 1) / 3.0)) {
    throw std::invalid_argument("perplexity must be positive and below (n-1)/3");
  }

  Matrix<double> dist2(n, n, 0.0);
  double largest = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = squared_distance(x.row(i), x.row(j));
      dist2(i, j) = dist2(j, i) = d;
      largest = std::max(largest, d);
    }
  }
  if (!(largest > 0)) throw std::invalid_argument("t-SNE input rows are all identical");

  const double target = std::log2(perplexity);
  Affinities out;
  out.beta.assign(n, 0.0);
  out.entropy_bits.assign(n, 0.0);
  Matrix<double> conditional(n, n, 0.0);
  std::vector<double> shifted(n - 1), weights(n - 1);

  for (std::size_t i = 0; i < n; ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) nearest = std::min(nearest, dist2(i, j));
    }
    double scale = 0;
    for (std::size_t j = 0, t = 0; j < n; ++j) {
      if (j == i) continue;
      shifted[t] = dist2(i, j) - nearest;
      scale += shifted[t++];
    }
    scale /= static_cast<double>(n - 1);

    double beta = 0;
    double entropy = detail::row_entropy(shifted, beta, weights);
    if (scale > 0) {
      // Bisection on log(beta); the bracket spans e^{+-60} around 1/scale.
      double lo = -std::log(scale) - 60.0, hi = -std::log(scale) + 60.0;
      for (std::size_t step = 0; step < kMaxBisectionSteps; ++step) {
        const double mid = 0.5 * (lo + hi);
        beta = std::exp(mid);
        entropy = detail::row_entropy(shifted, beta, weights);
        if (std::abs(entropy - target) < 0.1 * kEntropyTolerance) break;
        if (entropy > target) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
    }
    out.beta[i] = beta;
    out.entropy_bits[i] = entropy;
    double total = 0;
    for (double w : weights) total += w;
    for (std::size_t j = 0, t = 0; j < n; ++j) {
      if (j != i) conditional(i, j) = weights[t++] / total;
    }
  }

  out.p = Matrix<double>(n, n, 0.0);
  double sum = 0;
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = std::max((conditional(i, j) + conditional(j, i)) / denom, kAffinityFloor);
      out.p(i, j) = v;
      sum += v;
    }
  }
  for (double& v : out.p.values()) v /= sum;
  return out;
}

struct KlGradient {
  double kl = 0;
  Matrix<double> gradient;  // n x 2
};

namespace detail {

/// KL(P || Q) and the gradient of the objective with P scaled by `exaggeration`.
/// The returned KL always uses the unscaled P.
inline KlGradient kl_and_gradient(const Matrix<double>& p, const Matrix<double>& y, double exaggeration) {
  const std::size_t n = y.rows();
  const std::size_t dims = y.cols();
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) z += 2.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
  }

  KlGradient out;
  out.gradient = Matrix<double>(n, dims, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
      const double q = w / z;
      const double pij = p(i, j), pji = p(j, i);
      if (pij > 0) out.kl += pij * std::log(pij / q);
      if (pji > 0) out.kl += pji * std::log(pji / q);
      const double coeff = 2.0 * (exaggeration * (pij + pji) - 2.0 * q) * w;
      for (std::size_t c = 0; c < dims; ++c) {
        const double diff = y(i, c) - y(j, c);
        out.gradient(i, c) += coeff * diff;
        out.gradient(j, c) -= coeff * diff;
      }
    }
  }
  return out;
}

inline std::uint64_t hash_row(std::span<const double> row) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : row) {
    h ^= std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v);  // fold -0 into +0
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

}  // namespace detail

/// KL divergence and its gradient 4 sum_j (p_ij - q_ij)(y_i - y_j)/(1 + |y_i - y_j|^2).
inline KlGradient kl_and_gradient(const Matrix<double>& p, const Matrix<double>& y) {
  if (p.rows() != y.rows() || p.cols() != y.rows()) {
    throw std::invalid_argument("kl_and_gradient: P must be n x n for n embedding rows");
  }
  return detail::kl_and_gradient(p, y, 1.0);
}

/// Content keys for initialization: identical rows get identical starting points
/// and a permutation of the input permutes the starting points alike.
template <class T>
std::vector<std::uint64_t> content_keys(const Matrix<T>& x) {
  std::vector<std::uint64_t> keys(x.rows());
  std::vector<double> row(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto src = x.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = static_cast<double>(src[c]);
    keys[i] = detail::hash_row(row);
  }
  return keys;
}

struct TsneRun {
  Matrix<double> embedding;     // n x 2, column means 0
  std::vector<double> kl_trace;  // KL(P || Q) before each update
};

/// `row_keys` seeds each row's initial position together with config.seed;
/// defaults to content_keys(x).
template <class T>
TsneRun tsne_detailed(const Matrix<T>& x, const TsneConfig& config, std::span<const std::uint64_t> row_keys = {}) {
  const std::size_t n = x.rows();
  validate(config, n);
  if (!row_keys.empty() && row_keys.size() != n) {
    throw std::invalid_argument("t-SNE: row key count does not match row count");
  }
  const auto default_keys = row_keys.empty() ? content_keys(x) : std::vector<std::uint64_t>{};
  const std::span<const std::uint64_t> given = row_keys.empty() ? std::span(default_keys) : row_keys;

  // Work in key order so every floating-point sum sees rows in the same sequence.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (given[a] != given[b]) return given[a] < given[b];
    const auto ra = x.row(a), rb = x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  bool identity = true;
  for (std::size_t i = 0; i < n && identity; ++i) identity = order[i] == i;
  if (!identity) {
    std::vector<std::uint64_t> sorted_keys(n);
    for (std::size_t i = 0; i < n; ++i) sorted_keys[i] = given[order[i]];
    TsneRun sorted = tsne_detailed(x.select_rows(order), config, sorted_keys);
    TsneRun run{Matrix<double>(n, 2), std::move(sorted.kl_trace)};
    for (std::size_t i = 0; i < n; ++i) {
      run.embedding(order[i], 0) = sorted.embedding(i, 0);
      run.embedding(order[i], 1) = sorted.embedding(i, 1);
    }
    return run;
  }
  const std::span<const std::uint64_t> keys = given;

  const Affinities affinities = calibrate_affinities(x, config.perplexity);
  constexpr std::size_t kDims = 2;

  TsneRun run;
  Matrix<double>& y = run.embedding;
  y = Matrix<double>(n, kDims);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t base = mix_keys(config.seed, keys[i]);
    for (std::size_t c = 0; c < kDims; ++c) {
      y(i, c) = kInitScale * normal_from_bits(splitmix64(base + 2 * c), splitmix64(base + 2 * c + 1));
    }
  }

  Matrix<double> velocity(n, kDims, 0.0);
  Matrix<double> gains(n, kDims, 1.0);
  run.kl_trace.reserve(config.iterations);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
    const double momentum = it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    const KlGradient step = detail::kl_and_gradient(affinities.p, y, exaggeration);
    run.kl_trace.push_back(step.kl);

    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < kDims; ++c) {
        const double g = step.gradient(i, c);
        double& gain = gains(i, c);
        gain = ((g > 0) != (velocity(i, c) > 0)) ? gain + 0.2 : gain * 0.8;
        gain = std::max(gain, kMinGain);
        velocity(i, c) = momentum * velocity(i, c) - config.learning_rate * gain * g;
        y(i, c) += velocity(i, c);
      }
    }
    for (std::size_t c = 0; c < kDims; ++c) {
      double mean = 0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, c);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, c) -= mean;
    }
  }
  return run;
}

template <class T>
Matrix<double> tsne(const Matrix<T>& x, const TsneConfig& config, std::span<const std::uint64_t> row_keys = {}) {
  return tsne_detailed(x, config, row_keys).embedding;
}

/// Stable 64-bit key for a record id (FNV-1a).
inline std::uint64_t key_of(std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

}  // namespace corpus_atlas::project
