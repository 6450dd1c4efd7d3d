#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hyposcreen/error.hpp"
#include "hyposcreen/model.hpp"
#include "hyposcreen/parallel.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hyposcreen;
namespace ht = hyposcreen::testing;
using ht::naive_raw;

namespace {

double accuracy(const std::vector<double>& p, const std::vector<int>& y) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += (p[i] >= 0.5) == (y[i] == 1);
  return static_cast<double>(ok) / p.size();
}

BoostParams small_params(std::size_t trees) {
  BoostParams p;
  p.n_trees = trees;
  p.min_samples_leaf = 3;
  p.max_leaves = 8;
  p.max_bins = 32;
  return p;
}

}  // namespace

TEST(Logistic, SymmetricDataHasZeroIntercept) {
  Matrix x(2, 1);
  x(0, 0) = -1;
  x(1, 0) = 1;
  const std::vector<int> y{0, 1};
  const auto m = fit_logistic(x, y, 1.0);
  EXPECT_TRUE(m.converged);
  EXPECT_NEAR(m.intercept, 0.0, 1e-10);
  EXPECT_GT(m.weights[0], 0.0);
}

TEST(Logistic, GradientMatchesCentralDifferences) {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = ht::gaussian_matrix(rng, 30, 5);
    const auto y = ht::random_labels(rng, 30);
    std::vector<double> w(5);
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal(), l2 = 2.0 * rng.uniform();
    const auto g = logistic_gradient(x, y, l2, w, b);
    ASSERT_EQ(g.size(), 6u);
    const double h = 1e-6;
    for (std::size_t j = 0; j < 6; ++j) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (j < 5) wp[j] += h, wm[j] -= h;
      else bp += h, bm -= h;
      const double fd =
          (logistic_objective(x, y, l2, wp, bp) - logistic_objective(x, y, l2, wm, bm)) / (2.0 * h);
      EXPECT_LT(std::abs(fd - g[j]) / std::max(1.0, std::abs(g[j])), 1e-5) << "trial " << trial << " j " << j;
    }
  }
}

TEST(Logistic, SeparableDataFitsPerfectly) {
  Rng rng(42);
  const auto data = ht::shifted_gaussians(rng, 80, 3, 3, 8.0);
  const auto m = fit_logistic(data.x, data.y, 1e-6);
  EXPECT_DOUBLE_EQ(accuracy(predict_proba(m, data.x), data.y), 1.0);
}

TEST(Logistic, OptimumBeatsStartAndHasSmallGradient) {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = ht::shifted_gaussians(rng, 60, 4, 2, 1.0);
    const auto m = fit_logistic(data.x, data.y, 1.0);
    ASSERT_TRUE(m.converged);
    const std::vector<double> zero(4, 0.0);
    EXPECT_LE(logistic_objective(data.x, data.y, 1.0, m.weights, m.intercept),
              logistic_objective(data.x, data.y, 1.0, zero, 0.0));
    for (double g : logistic_gradient(data.x, data.y, 1.0, m.weights, m.intercept)) EXPECT_LT(std::abs(g), 1e-8);
  }
}

TEST(Logistic, ZeroModelIsHalfAndSingleClassThrows) {
  LogisticModel m;
  m.weights = {0, 0, 0};
  const std::vector<double> row{3, -1, 8};
  EXPECT_EQ(m.predict(row), 0.5);
  Matrix x(3, 1);
  const std::vector<int> y{1, 1, 1};
  try {
    fit_logistic(x, y, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClass);
  }
}

TEST(Logistic, ProbabilitiesStayInsideOpenInterval) {
  EXPECT_GT(sigmoid(-1e6), 0.0);
  EXPECT_LT(sigmoid(1e6), 1.0);
  EXPECT_NEAR(softplus(800.0), 800.0, 1e-12);
  EXPECT_NEAR(softplus(-800.0), 0.0, 1e-300);
}

TEST(Binning, DistinctAndConstantColumns) {
  Matrix x(6, 2);
  const double a[] = {1, 2, 3, 4, 2, 3};
  for (std::size_t r = 0; r < 6; ++r) x(r, 0) = a[r], x(r, 1) = 7.0;
  const auto m = quantile_bin(x);
  EXPECT_EQ(m.bin_count(0), 4u);
  EXPECT_EQ(m.thresholds[0].size(), 3u);
  EXPECT_EQ(m.bin_count(1), 1u);
  EXPECT_EQ(m.bin(0, 1.0), 0);
  EXPECT_EQ(m.bin(0, 4.0), 3);
  EXPECT_THROW(quantile_bin(Matrix(0, 2)), Error);
  EXPECT_THROW(quantile_bin(x, 1), Error);
}

TEST(Binning, EqualMassAgainstSortOracle) {
  Rng rng(44);
  Matrix x(10000, 1);
  for (auto& v : x.data()) v = rng.normal();
  const auto m = quantile_bin(x, 64);
  ASSERT_EQ(m.bin_count(0), 64u);
  std::vector<double> sorted(x.data().begin(), x.data().end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t b = 0; b + 1 < 64; ++b) {
    // Mass below threshold b from the sorted array.
    const auto below = std::upper_bound(sorted.begin(), sorted.end(), m.thresholds[0][b]) - sorted.begin();
    EXPECT_NEAR(static_cast<double>(below) / 10000.0, (b + 1) / 64.0, 0.01 / 64.0);
  }
  std::vector<std::size_t> counts(64, 0);
  for (double v : x.data()) ++counts[m.bin(0, v)];
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c) / 10000.0, 1.0 / 64.0, 0.01 / 64.0);
}

// Properties: thresholds strictly increase and the bin index is monotone.
TEST(Binning, MonotoneAndStrictlyIncreasing) {
  Rng rng(45);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 1 + rng.below(400);
    Matrix x(rows, 1);
    const double step = rng.uniform() < 0.5 ? 0.25 : 0.0;  // sometimes heavy ties
    for (auto& v : x.data()) v = step > 0 ? step * static_cast<double>(rng.below(20)) : rng.normal();
    const auto m = quantile_bin(x, 2 + rng.below(254));
    const auto& t = m.thresholds[0];
    for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LT(t[i - 1], t[i]);
    std::vector<double> probe(200);
    for (auto& v : probe) v = 4.0 * rng.normal() + 2.0;
    std::sort(probe.begin(), probe.end());
    for (std::size_t i = 1; i < probe.size(); ++i) EXPECT_LE(m.bin(0, probe[i - 1]), m.bin(0, probe[i]));
    for (std::size_t b = 0; b < t.size(); ++b) EXPECT_EQ(m.bin(0, t[b]), b);
  }
}

// Exhaustive best-split oracle for a single stump on one feature.
TEST(Boosting, StumpMatchesExhaustiveSplitOracle) {
  Rng rng(46);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + rng.below(80);
    Matrix x(n, 1);
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) {
      x(r, 0) = rng.uniform();
      y[r] = (x(r, 0) > 0.5) != (rng.uniform() < 0.2);  // separable at 0.5 with label noise
    }
    y[0] = 0, y[1] = 1;
    BoostParams p;
    p.n_trees = 1;
    p.max_depth = 1;
    p.min_samples_leaf = 1 + rng.below(4);
    p.max_bins = 2 + rng.below(60);
    p.l2_leaf = rng.uniform();
    const auto m = fit_histgbm(x, y, p, 1);

    double pos = 0;
    for (int v : y) pos += v;
    const double p0 = pos / n;
    const std::size_t nb = m.bin_mapper.bin_count(0);
    std::vector<double> g(nb, 0), h(nb, 0), c(nb, 0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto b = m.bin_mapper.bin(0, x(r, 0));
      g[b] += p0 - y[r];
      h[b] += p0 * (1 - p0);
      c[b] += 1;
    }
    double G = 0, H = 0;
    for (std::size_t b = 0; b < nb; ++b) G += g[b], H += h[b];
    std::vector<double> gain(nb, -1.0), prefix_g(nb), prefix_h(nb);
    double best = 0.0;
    double gl = 0, hl = 0, cl = 0;
    for (std::size_t b = 0; b + 1 < nb; ++b) {
      gl += g[b], hl += h[b], cl += c[b];
      prefix_g[b] = gl, prefix_h[b] = hl;
      if (cl < p.min_samples_leaf || n - cl < p.min_samples_leaf || c[b] == 0) continue;
      gain[b] = split_gain(gl, hl, G - gl, H - hl, p.l2_leaf);
      best = std::max(best, gain[b]);
    }
    const auto& nodes = m.trees.at(0).nodes;
    if (best <= 1e-12) {
      EXPECT_EQ(nodes.size(), 1u);
      continue;
    }
    ASSERT_EQ(nodes.size(), 3u) << "trial " << trial;
    // Mirrored bins can tie exactly in real arithmetic; any split within
    // rounding of the best is accepted, and nothing earlier may beat it.
    const std::size_t chosen = nodes[0].bin_threshold;
    EXPECT_GE(gain[chosen], best * (1 - 1e-12)) << "trial " << trial;
    for (std::size_t b = 0; b < chosen; ++b) EXPECT_LE(gain[b], gain[chosen] * (1 + 1e-12));
    EXPECT_NEAR(nodes[static_cast<std::size_t>(nodes[0].left)].value,
                -prefix_g[chosen] / (prefix_h[chosen] + p.l2_leaf), 1e-12);
    EXPECT_NEAR(nodes[static_cast<std::size_t>(nodes[0].right)].value,
                -(G - prefix_g[chosen]) / (H - prefix_h[chosen] + p.l2_leaf), 1e-12);
  }
}

TEST(Boosting, SeparableTwoDimensionalFitsPerfectly) {
  Rng rng(47);
  Matrix x(200, 2);
  std::vector<int> y(200);
  for (std::size_t r = 0; r < 200; ++r) {
    x(r, 0) = rng.uniform(), x(r, 1) = rng.uniform();
    y[r] = x(r, 0) + x(r, 1) > 1.0;
  }
  BoostParams p;
  p.n_trees = 50;
  p.min_samples_leaf = 2;
  const auto m = fit_histgbm(x, y, p, 3);
  EXPECT_DOUBLE_EQ(accuracy(predict_proba(m, x), y), 1.0);
}

TEST(Boosting, TrainingLossNonIncreasing) {
  Rng rng(48);
  for (int trial = 0; trial < 30; ++trial) {
    const auto d = ht::shifted_gaussians(rng, 60 + rng.below(100), 1 + rng.below(5), 1, 1.0 + rng.uniform());
    auto p = small_params(20);
    p.learning_rate = 0.05 + 0.9 * rng.uniform();
    p.l2_leaf = 0.1 + rng.uniform();
    const auto m = fit_histgbm(d.x, d.y, p, rng.next());
    ASSERT_EQ(m.train_loss.size(), m.trees.size() + 1);
    for (std::size_t i = 1; i < m.train_loss.size(); ++i)
      EXPECT_LE(m.train_loss[i], m.train_loss[i - 1] + 1e-9) << "trial " << trial << " round " << i;
  }
}

TEST(Boosting, PriorAndZeroTrees) {
  Matrix x(10, 1);
  std::vector<int> y(10, 0);
  for (std::size_t r = 0; r < 10; ++r) x(r, 0) = static_cast<double>(r);
  y[0] = y[5] = y[9] = 1;
  auto p = small_params(0);
  const auto m = fit_histgbm(x, y, p, 0);
  EXPECT_NEAR(m.base_score, std::log(0.3 / 0.7), 1e-15);
  for (double v : predict_proba(m, x)) EXPECT_NEAR(v, 0.3, 1e-15);
}

TEST(Boosting, PredictionMatchesNaiveTreeWalk) {
  Rng rng(49);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = ht::shifted_gaussians(rng, 150, 6, 3, 0.8);
    const auto m = fit_histgbm(d.x, d.y, small_params(30), rng.next());
    const auto probe = ht::gaussian_matrix(rng, 100, 6);
    const auto p = predict_proba(m, probe);
    for (std::size_t r = 0; r < 100; ++r) {
      EXPECT_NEAR(p[r], sigmoid(naive_raw(m, probe.row(r))), 1e-12);
      EXPECT_NEAR(m.raw_score(probe.row(r)), naive_raw(m, probe.row(r)), 1e-12);
      EXPECT_GT(p[r], 0.0);
      EXPECT_LT(p[r], 1.0);
    }
    for (const auto& tree : m.trees)
      for (const auto& node : tree.nodes) {
        if (!node.is_leaf()) EXPECT_LT(static_cast<std::size_t>(node.feature), m.feature_count);
        EXPECT_TRUE(std::isfinite(node.value));
      }
  }
}

TEST(Boosting, WidthMismatchAndBadParams) {
  Rng rng(50);
  const auto d = ht::shifted_gaussians(rng, 60, 3, 1, 1.0);
  const auto m = fit_histgbm(d.x, d.y, small_params(3), 0);
  try {
    predict_proba(m, Matrix(2, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WidthMismatch);
  }
  auto p = small_params(3);
  p.learning_rate = 0.0;
  try {
    fit_histgbm(d.x, d.y, p, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateParams);
  }
}

TEST(Histogram, SubtractionMatchesDirect) {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(500), bins = 2 + rng.below(254);
    std::vector<std::uint8_t> fb(n);
    std::vector<double> g(n), h(n);
    for (std::size_t i = 0; i < n; ++i) {
      fb[i] = static_cast<std::uint8_t>(rng.below(bins));
      g[i] = rng.normal();
      h[i] = rng.uniform();
    }
    std::vector<std::uint32_t> all, left, right;
    for (std::uint32_t i = 0; i < n; ++i) {
      all.push_back(i);
      (rng.uniform() < 0.4 ? left : right).push_back(i);
    }
    const auto parent = build_histogram(fb, all, g, h, bins);
    const auto l = build_histogram(fb, left, g, h, bins);
    const auto r_direct = build_histogram(fb, right, g, h, bins);
    const auto r_sub = subtract_histogram(parent, l);
    for (std::size_t b = 0; b < bins; ++b) {
      EXPECT_EQ(r_sub[b].count, r_direct[b].count);
      EXPECT_NEAR(r_sub[b].grad, r_direct[b].grad, 1e-9);
      EXPECT_NEAR(r_sub[b].hess, r_direct[b].hess, 1e-9);
    }
  }
}

TEST(Boosting, AcceptedSplitsHavePositiveGainAndPureLeavesStay) {
  Rng rng(52);
  const auto d = ht::shifted_gaussians(rng, 120, 4, 2, 1.5);
  const auto m = fit_histgbm(d.x, d.y, small_params(10), 5);
  // Recompute each root split's gain from the round's gradients is covered by
  // the stump oracle; here check that a pure node is never split.
  Matrix x(40, 1);
  std::vector<int> y(40);
  for (std::size_t r = 0; r < 40; ++r) x(r, 0) = static_cast<double>(r), y[r] = r >= 20;
  auto p = small_params(1);
  p.min_samples_leaf = 1;
  p.max_leaves = 31;
  const auto stump = fit_histgbm(x, y, p, 0);
  EXPECT_EQ(stump.trees[0].nodes.size(), 3u);  // one split, both children pure
  EXPECT_FALSE(m.trees.empty());
}

TEST(Serialization, RoundTripAndDeterminismAcrossThreads) {
  Rng rng(53);
  const auto d = ht::shifted_gaussians(rng, 200, 8, 3, 0.7);
  auto p = small_params(25);
  p.feature_fraction = 0.6;
  set_thread_count(1);
  const auto a = fit_histgbm(d.x, d.y, p, 77);
  set_thread_count(4);
  const auto b = fit_histgbm(d.x, d.y, p, 77);
  set_thread_count(1);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(boosted_from_json(to_json(a)), a);
  EXPECT_EQ(to_json(boosted_from_json(to_json(a))).dump(), to_json(a).dump());
  EXPECT_EQ(boost_params_from_json(to_json(p)), p);

  const auto lr = fit_logistic(d.x, d.y, 1.0);
  EXPECT_EQ(logistic_from_json(to_json(lr)), lr);
  auto bad = to_json(a);
  bad["schema_version"] = 99;
  EXPECT_THROW(boosted_from_json(bad), Error);
}
