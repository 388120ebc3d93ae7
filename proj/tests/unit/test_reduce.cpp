#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "corpus_atlas/reduce.hpp"
#include "helpers.hpp"

namespace reduce = corpus_atlas::reduce;
using corpus_atlas::Matrix;
using testing_support::TempDir;
using testing_support::to_matrix;

namespace {

/// Random data with a spread of column scales and some correlation.
oracle::Points correlated(oracle::Gen& g, std::size_t n, std::size_t d) {
  auto base = g.points(n, d);
  oracle::Points x(n, std::vector<double>(d, 0.0));
  std::vector<std::vector<double>> mix(d, std::vector<double>(d));
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) mix[a][b] = g.normal() / (1.0 + a);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) x[i][b] += base[i][a] * mix[a][b];
    }
  }
  return x;
}

double max_orthonormality_error(const reduce::PcaModel& m) {
  double worst = 0;
  for (std::size_t a = 0; a < m.retained(); ++a) {
    for (std::size_t b = 0; b < m.retained(); ++b) {
      double dot = 0;
      for (std::size_t j = 0; j < m.input_dim(); ++j) dot += m.components(a, j) * m.components(b, j);
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace

TEST(Pca, RankOneDataKeepsOneComponent) {
  const auto x = to_matrix({{1, 1}, {2, 2}, {3, 3}});
  const auto m = reduce::fit(x, 0.95);
  ASSERT_EQ(m.retained(), 1u);
  EXPECT_NEAR(m.explained_ratio[0], 1.0, 1e-12);
  const auto y = reduce::transform(m, x);
  EXPECT_NEAR(y(0, 0), -std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(y(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(y(2, 0), std::sqrt(2.0), 1e-12);
}

TEST(Pca, RankOneProjectionScalesWithSpacing) {
  const auto x = to_matrix({{0, 5}, {2.5, 7.5}, {5, 10}});
  const auto y = reduce::transform(reduce::fit(x, 0.95), x);
  const double s = 2.5;
  EXPECT_NEAR(std::abs(y(0, 0)), std::sqrt(2.0) * s, 1e-12);
  EXPECT_NEAR(y(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(y(0, 0), -y(2, 0), 1e-12);
}

TEST(Pca, EigenvaluesNineAndOneNeedBothComponents) {
  const auto x = to_matrix({{3, 1}, {-3, 1}, {3, -1}, {-3, -1}});
  const auto m = reduce::fit(x, 0.95);
  ASSERT_EQ(m.retained(), 2u);
  EXPECT_NEAR(m.explained_ratio[0], 0.9, 1e-12);
  EXPECT_NEAR(m.explained_ratio[1], 0.1, 1e-12);
  EXPECT_EQ(reduce::fit(x, 0.9).retained(), 1u);
}

TEST(Pca, SignConventionLargestCoordinatePositive) {
  oracle::Gen g(5);
  const auto m = reduce::fit(to_matrix(correlated(g, 60, 8)), 1.0);
  for (std::size_t c = 0; c < m.retained(); ++c) {
    std::size_t pivot = 0;
    for (std::size_t j = 1; j < m.input_dim(); ++j) {
      if (std::abs(m.components(c, j)) > std::abs(m.components(c, pivot))) pivot = j;
    }
    EXPECT_GT(m.components(c, pivot), 0.0);
  }
}

TEST(Pca, CurveMatchesJacobiOracle) {
  oracle::Gen g(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pts = correlated(g, 50, 20);
    const auto m = reduce::fit(to_matrix(pts), 1.0);
    const auto eig = oracle::symmetric_eigenvalues(oracle::covariance(pts));
    const double total = std::accumulate(eig.begin(), eig.end(), 0.0);
    const auto curve = reduce::explained_curve(m);
    double running = 0;
    ASSERT_LE(curve.size(), eig.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
      running += eig[i] / total;
      EXPECT_NEAR(curve[i], running, 1e-8) << "trial " << trial << " component " << i;
    }
    EXPECT_NEAR(m.total_variance, total, 1e-8 * total);
    EXPECT_LT(max_orthonormality_error(m), 1e-8);
  }
}

TEST(Pca, RetainedCountIsSmallestMeetingTarget) {
  oracle::Gen g(12);
  const auto pts = correlated(g, 80, 12);
  for (double target : {0.3, 0.5, 0.8, 0.9, 0.95, 0.99}) {
    const auto m = reduce::fit(to_matrix(pts), target);
    const auto curve = reduce::explained_curve(m);
    EXPECT_GE(curve.back(), target - 1e-12);
    if (curve.size() > 1) {
      EXPECT_LT(curve[curve.size() - 2], target);
    }
    for (std::size_t i = 1; i < m.explained_ratio.size(); ++i) {
      EXPECT_LE(m.explained_ratio[i], m.explained_ratio[i - 1]);
      EXPECT_GT(m.explained_ratio[i], 0.0);
    }
    EXPECT_LE(curve.back(), 1.0 + 1e-12);
  }
}

TEST(Pca, ExplainedCurveRunningSum) {
  reduce::PcaModel m;
  m.explained_ratio = {0.6, 0.3, 0.1};
  const auto c = reduce::explained_curve(m);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c[0], 0.6);
  EXPECT_DOUBLE_EQ(c[1], 0.9);
  EXPECT_NEAR(c[2], 1.0, 1e-15);
  m.explained_ratio = {1.0};
  EXPECT_EQ(reduce::explained_curve(m).size(), 1u);
}

TEST(Pca, FullRankTransformPreservesDistances) {
  oracle::Gen g(13);
  const auto pts = correlated(g, 30, 6);
  const auto x = to_matrix(pts);
  const auto m = reduce::fit(x, 1.0);
  ASSERT_EQ(m.retained(), 6u);
  const auto y = reduce::transform(m, x);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) {
      const double before = corpus_atlas::squared_distance(x.row(i), x.row(j));
      const double after = corpus_atlas::squared_distance(y.row(i), y.row(j));
      EXPECT_NEAR(std::sqrt(after), std::sqrt(before), 1e-6 * std::sqrt(before));
    }
  }
}

TEST(Pca, MeanRowMapsToZero) {
  oracle::Gen g(14);
  const auto m = reduce::fit(to_matrix(correlated(g, 40, 5)), 0.9);
  Matrix<double> mean(1, m.input_dim());
  for (std::size_t j = 0; j < m.input_dim(); ++j) mean(0, j) = m.mean[j];
  const auto y = reduce::transform(m, mean);
  for (double v : y.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Pca, ReconstructionLossBoundedByDiscardedVariance) {
  oracle::Gen g(15);
  for (double target : {0.5, 0.8, 0.95}) {
    const auto x = to_matrix(correlated(g, 70, 10));
    const auto m = reduce::fit(x, target);
    const auto back = reduce::inverse_transform(m, reduce::transform(m, x));
    double residual = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) residual += corpus_atlas::squared_distance(x.row(i), back.row(i));
    residual /= static_cast<double>(x.rows() - 1);
    const double kept = reduce::explained_curve(m).back();
    EXPECT_LE(residual / m.total_variance, 1.0 - kept + 1e-6);
  }
}

TEST(Pca, ReducedColumnsUncorrelated) {
  oracle::Gen g(16);
  const auto x = to_matrix(correlated(g, 100, 7));
  const auto y = reduce::transform(reduce::fit(x, 1.0), x);
  const auto cov = oracle::covariance(testing_support::to_points(y));
  double scale = 0;
  for (std::size_t a = 0; a < cov.size(); ++a) scale = std::max(scale, cov[a][a]);
  for (std::size_t a = 0; a < cov.size(); ++a) {
    for (std::size_t b = 0; b < cov.size(); ++b) {
      if (a != b) {
        EXPECT_LT(std::abs(cov[a][b]), 1e-6 * scale);
      }
    }
  }
}

TEST(Pca, DeterministicBitIdentical) {
  oracle::Gen g(17);
  const auto x = to_matrix(correlated(g, 50, 9));
  const auto a = reduce::fit(x, 0.95);
  const auto b = reduce::fit(x, 0.95);
  EXPECT_EQ(a.components, b.components);
  EXPECT_EQ(a.explained_ratio, b.explained_ratio);
  EXPECT_EQ(reduce::serialize_model(a), reduce::serialize_model(b));
}

TEST(Pca, Errors) {
  EXPECT_THROW(reduce::fit(to_matrix({{1, 2}}), 0.95), std::invalid_argument);
  EXPECT_THROW(reduce::fit(to_matrix({{1, 2}, {1, 2}, {1, 2}}), 0.95), std::invalid_argument);
  EXPECT_THROW(reduce::fit(to_matrix({{1, 2}, {3, 4}}), 0.0), std::invalid_argument);
  EXPECT_THROW(reduce::fit(to_matrix({{1, 2}, {3, 4}}), 1.5), std::invalid_argument);
  const auto m = reduce::fit(to_matrix({{1, 2}, {3, 5}, {0, 1}}), 0.95);
  EXPECT_THROW(reduce::transform(m, to_matrix({{1, 2, 3}})), std::invalid_argument);
}

TEST(Pca, EmbeddingTransformKeepsIds) {
  corpus_atlas::embedstore::EmbeddingMatrix e;
  e.values = Matrix<float>(4, 2, std::vector<float>{3, 1, -3, 1, 3, -1, -3, -1});
  e.ids = {"a", "b", "c", "d"};
  e.variant = "scibert-t";
  const auto m = reduce::fit(e, 0.95);
  const auto r = reduce::transform(m, e);
  EXPECT_EQ(r.ids, e.ids);
  EXPECT_EQ(r.variant, "pca-scibert-t");
  EXPECT_EQ(r.dim(), 2u);
}

TEST(Pca, ModelFileRoundTripIsExact) {
  TempDir dir("pca");
  oracle::Gen g(18);
  const auto m = reduce::fit(to_matrix(correlated(g, 40, 6)), 0.9);
  reduce::save_model(m, dir / "pca.json");
  const auto back = reduce::load_model(dir / "pca.json");
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.components, m.components);
  EXPECT_EQ(back.explained_ratio, m.explained_ratio);
  EXPECT_EQ(back.total_variance, m.total_variance);
  EXPECT_EQ(back.fit_rows, m.fit_rows);
  corpus_atlas::io::write_file(dir / "bad.json", "{\"format\": \"pca/1\"}");
  EXPECT_THROW(reduce::load_model(dir / "bad.json"), std::runtime_error);
}
