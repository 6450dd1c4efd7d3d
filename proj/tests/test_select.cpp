#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "hyposcreen/error.hpp"
#include "hyposcreen/select.hpp"
#include "support.hpp"

using namespace hyposcreen;
namespace ht = hyposcreen::testing;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Two informative columns (f0, f1) among ten.
ht::Labeled informative_problem(std::uint64_t seed) {
  Rng rng(seed);
  return ht::shifted_gaussians(rng, 200, 10, 2, 1.5);
}

BoostSelectOptions options(std::size_t n_target, double eps = 1e-4) {
  BoostSelectOptions o;
  o.n_target = n_target;
  o.improvement_eps = eps;
  o.booster.n_trees = 20;
  return o;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST(LrCoef, LabelCopyRanksFirst) {
  Rng rng(61);
  Matrix x = ht::random_matrix(rng, 100, 10, 0, 1);
  const auto y = ht::random_labels(rng, 100);
  for (std::size_t r = 0; r < 100; ++r) x(r, 6) = y[r];
  const auto names = ht::column_names(10);
  const auto rank = rank_features_lr(x, y, names);
  EXPECT_EQ(rank.names.front(), "f6");
  EXPECT_EQ(as_set(rank.names), as_set(names));
  for (std::size_t i = 1; i < rank.scores.size(); ++i) EXPECT_GE(rank.scores[i - 1], rank.scores[i]);
}

TEST(LrCoef, IdenticalCopiesAreAdjacentAndLexicographic) {
  Rng rng(62);
  const auto d = ht::shifted_gaussians(rng, 120, 4, 1, 2.0);
  Matrix x(120, 5);
  for (std::size_t r = 0; r < 120; ++r) {
    for (std::size_t c = 0; c < 4; ++c) x(r, c) = d.x(r, c);
    x(r, 4) = d.x(r, 0);
  }
  const std::vector<std::string> names{"b_copy", "n1", "n2", "n3", "a_copy"};
  const auto rank = rank_features_lr(x, d.y, names);
  EXPECT_EQ(rank.names[0], "a_copy");
  EXPECT_EQ(rank.names[1], "b_copy");
  EXPECT_EQ(rank.scores[0], rank.scores[1]);
}

TEST(LrCoef, ConstantFeaturesRankLexicographically) {
  Matrix x(20, 4, 0.5);
  std::vector<int> y(20);
  for (std::size_t r = 0; r < 20; ++r) y[r] = r % 2;
  const std::vector<std::string> names{"d", "b", "c", "a"};
  const auto rank = rank_features_lr(x, y, names);
  EXPECT_EQ(rank.names, (std::vector<std::string>{"a", "b", "c", "d"}));
  for (double s : rank.scores) EXPECT_NEAR(s, 0.0, 1e-9);
  EXPECT_EQ(rank.top(2), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(rank.top(10).size(), 4u);
}

TEST(LrCoef, InvariantToRowPermutation) {
  Rng rng(63);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = ht::shifted_gaussians(rng, 80, 6, 3, 1.0);
    std::vector<std::size_t> perm(80);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span(perm));
    std::vector<int> y2;
    for (auto i : perm) y2.push_back(d.y[i]);
    const auto names = ht::column_names(6);
    const auto a = rank_features_lr(d.x, d.y, names);
    const auto b = rank_features_lr(d.x.select_rows(perm), y2, names);
    EXPECT_EQ(a.names, b.names);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(a.scores[i], b.scores[i], 1e-8);
  }
}

TEST(LrCoef, SingleClassThrows) {
  Matrix x(5, 2, 1.0);
  const std::vector<int> y(5, 0);
  try {
    rank_features_lr(x, y, ht::column_names(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingleClass);
  }
}

TEST(BoostRfe, RetainsInformativeFeaturesAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = informative_problem(100 + seed);
    const auto r = boost_rfe(d.x, d.y, ht::column_names(10), options(2), seed);
    EXPECT_EQ(as_set(r.names), (std::set<std::string>{"f0", "f1"})) << "seed " << seed;
  }
}

TEST(BoostRfe, FullTargetIsIdentityAndInfiniteEpsShrinksToTarget) {
  const auto d = informative_problem(7);
  const auto names = ht::column_names(10);
  const auto same = boost_rfe(d.x, d.y, names, options(10), 1);
  EXPECT_EQ(same.names, names);
  for (std::size_t n : {1u, 3u, 6u}) {
    const auto r = boost_rfe(d.x, d.y, names, options(n, kInf), 1);
    EXPECT_EQ(r.names.size(), n);
    for (const auto& f : r.names) EXPECT_TRUE(as_set(names).count(f));
  }
}

TEST(BoostRfa, SelectsInformativeFeaturesAcrossSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = informative_problem(200 + seed);
    const auto r = boost_rfa(d.x, d.y, ht::column_names(10), options(2), seed);
    EXPECT_EQ(as_set(r.names), (std::set<std::string>{"f0", "f1"})) << "seed " << seed;
  }
}

TEST(BoostRfa, PolicyCases) {
  const auto d = informative_problem(8);
  const auto names = ht::column_names(10);
  const auto all = boost_rfa(d.x, d.y, names, options(10, -kInf), 4);
  ASSERT_EQ(all.names.size(), 10u);  // the full importance order
  const auto one = boost_rfa(d.x, d.y, names, options(1), 4);
  ASSERT_EQ(one.names.size(), 1u);
  EXPECT_EQ(one.names[0], all.names[0]);
  const auto four = boost_rfa(d.x, d.y, names, options(4, -kInf), 4);
  EXPECT_EQ(four.names, std::vector<std::string>(all.names.begin(), all.names.begin() + 4));
}

TEST(BoostSelect, DeterministicAndBounded) {
  Rng rng(64);
  for (int trial = 0; trial < 4; ++trial) {
    const auto d = ht::shifted_gaussians(rng, 90, 6, 2, 1.0);
    const auto names = ht::column_names(6);
    const std::size_t n = 1 + rng.below(5);
    const auto seed = rng.next();
    for (auto fn : {&boost_rfe, &boost_rfa}) {
      const auto a = fn(d.x, d.y, names, options(n), seed);
      const auto b = fn(d.x, d.y, names, options(n), seed);
      EXPECT_EQ(a.names, b.names);
      EXPECT_EQ(a.scores, b.scores);
      EXPECT_LE(a.names.size(), n);
      EXPECT_GE(a.names.size(), 1u);
      for (double s : a.scores) EXPECT_TRUE(std::isfinite(s));
      for (const auto& f : a.names) EXPECT_TRUE(as_set(names).count(f));
    }
  }
}

TEST(BoostSelect, InnerCvAurocSeparatesSignalFromNoise) {
  const auto d = informative_problem(9);
  const auto signal = inner_cv_auroc(d.x, d.y, options(1).booster, 3, 1);
  Rng rng(65);
  const auto noise = inner_cv_auroc(ht::gaussian_matrix(rng, 200, 10), d.y, options(1).booster, 3, 1);
  EXPECT_GT(signal, 0.75);
  EXPECT_LT(noise, 0.65);
  EXPECT_EQ(parse_selection_method(to_string(SelectionMethod::BoostRfa)), SelectionMethod::BoostRfa);
  EXPECT_FALSE(parse_selection_method("mutual_info").has_value());
}
