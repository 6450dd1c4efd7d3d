#include "hyposcreen/select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyposcreen/error.hpp"
#include "hyposcreen/explain.hpp"
#include "hyposcreen/metrics.hpp"
#include "hyposcreen/parallel.hpp"
#include "hyposcreen/preprocess.hpp"
#include "hyposcreen/rng.hpp"

namespace hyposcreen {

std::string_view to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::LrCoef: return "lr_coef";
    case SelectionMethod::BoostRfe: return "boost_rfe";
    case SelectionMethod::BoostRfa: return "boost_rfa";
  }
  return "";
}

std::optional<SelectionMethod> parse_selection_method(std::string_view text) {
  for (auto m : {SelectionMethod::LrCoef, SelectionMethod::BoostRfe, SelectionMethod::BoostRfa})
    if (to_string(m) == text) return m;
  return std::nullopt;
}

std::vector<std::string> FeatureRanking::top(std::size_t n) const {
  return {names.begin(), names.begin() + static_cast<std::ptrdiff_t>(std::min(n, names.size()))};
}

nlohmann::json to_json(const FeatureRanking& ranking) {
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < ranking.names.size(); ++i)
    features.push_back({{"name", ranking.names[i]}, {"score", ranking.scores[i]}});
  return {{"method", to_string(ranking.method)}, {"features", features}};
}

namespace {

void check_inputs(const Matrix& x, std::span<const int> labels, std::span<const std::string> names) {
  if (x.rows() != labels.size()) throw Error(ErrorCode::LengthMismatch, "row count differs from label count");
  if (x.cols() != names.size()) throw Error(ErrorCode::ColumnMismatch, "name count differs from matrix width");
  require_both_classes(labels);
}

// Sorts column indices by score descending, ties by name ascending.
std::vector<std::size_t> order_by_score(std::span<const double> scores, std::span<const std::string> names,
                                        std::span<const std::size_t> columns) {
  std::vector<std::size_t> order(columns.begin(), columns.end());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return names[a] < names[b];
  });
  return order;
}

FeatureRanking make_ranking(SelectionMethod method, std::span<const std::size_t> order,
                            std::span<const double> scores, std::span<const std::string> names) {
  FeatureRanking out;
  out.method = method;
  for (std::size_t c : order) {
    out.names.push_back(names[c]);
    out.scores.push_back(scores[c]);
  }
  return out;
}

// Mean |SHAP| per original column, scattered back from a column subset.
std::vector<double> importance(const Matrix& x, std::span<const int> labels, std::span<const std::size_t> columns,
                               const BoostParams& params, std::uint64_t seed) {
  const Matrix sub = x.select_cols(columns);
  const auto model = fit_histgbm(sub, labels, params, seed);
  const auto shap = mean_abs_shap(model, sub);
  std::vector<double> out(x.cols(), 0.0);
  for (std::size_t i = 0; i < columns.size(); ++i) out[columns[i]] = shap[i];
  return out;
}

double subset_auroc(const Matrix& x, std::span<const int> labels, std::span<const std::size_t> columns,
                    const BoostSelectOptions& options, std::uint64_t seed) {
  return inner_cv_auroc(x.select_cols(columns), labels, options.booster, options.inner_folds, seed);
}

void check_options(const BoostSelectOptions& options) {
  if (options.n_target < 1) throw Error(ErrorCode::DegenerateParams, "n_target must be >= 1");
  if (options.inner_folds < 2) throw Error(ErrorCode::DegenerateParams, "inner_folds must be >= 2");
}

}  // namespace

FeatureRanking rank_features_lr(const Matrix& scaled, std::span<const int> labels,
                                std::span<const std::string> names, double l2_strength) {
  check_inputs(scaled, labels, names);
  const auto model = fit_logistic(scaled, labels, l2_strength);
  if (!model.converged)
    throw Error(ErrorCode::NonConvergence,
                "logistic ranking did not converge after " + std::to_string(model.iterations) + " iterations");
  std::vector<double> scores(names.size());
  // Coefficients at round-off level count as exact zeros so that ties fall
  // back to name order.
  for (std::size_t j = 0; j < scores.size(); ++j) {
    const double a = std::abs(model.weights[j]);
    scores[j] = a < 1e-12 ? 0.0 : a;
  }
  std::vector<std::size_t> all(names.size());
  std::iota(all.begin(), all.end(), 0);
  return make_ranking(SelectionMethod::LrCoef, order_by_score(scores, names, all), scores, names);
}

BoostParams selection_booster_defaults() {
  BoostParams p;
  p.n_trees = 50;
  p.max_leaves = 15;
  p.min_samples_leaf = 10;
  return p;
}

double inner_cv_auroc(const Matrix& x, std::span<const int> labels, const BoostParams& params,
                      std::size_t folds, std::uint64_t seed) {
  const auto plan = stratified_kfold(labels, folds, seed);
  std::vector<double> per_fold(folds, 0.0);
  parallel_for(folds, [&](std::size_t f) {
    const auto train = plan.train_indices(f);
    const auto test = plan.test_indices(f);
    std::vector<int> y_train, y_test;
    for (auto i : train) y_train.push_back(labels[i]);
    for (auto i : test) y_test.push_back(labels[i]);
    const auto model = fit_histgbm(x.select_rows(train), y_train, params, derive_seed(seed, 1000 + f));
    per_fold[f] = auroc(predict_proba(model, x.select_rows(test)), y_test);
  });
  return std::accumulate(per_fold.begin(), per_fold.end(), 0.0) / static_cast<double>(folds);
}

FeatureRanking boost_rfe(const Matrix& x, std::span<const int> labels, std::span<const std::string> names,
                         const BoostSelectOptions& options, std::uint64_t seed) {
  check_inputs(x, labels, names);
  check_options(options);
  std::vector<std::size_t> current(names.size());
  std::iota(current.begin(), current.end(), 0);
  if (options.n_target >= current.size()) {
    return make_ranking(SelectionMethod::BoostRfe, current, std::vector<double>(names.size(), 0.0), names);
  }

  const std::uint64_t cv_seed = derive_seed(seed, 1);
  double previous = subset_auroc(x, labels, current, options, cv_seed);
  auto scores = importance(x, labels, current, options.booster, derive_seed(seed, 2));
  for (std::size_t round = 0; current.size() > options.n_target; ++round) {
    // Least important; ties drop the name that sorts last.
    const auto order = order_by_score(scores, names, current);
    const std::size_t weakest = order.back();
    std::vector<std::size_t> candidate;
    for (std::size_t c : current)
      if (c != weakest) candidate.push_back(c);
    const double score = subset_auroc(x, labels, candidate, options, cv_seed);
    if (score < previous - options.improvement_eps) break;
    previous = score;
    current = std::move(candidate);
    scores = importance(x, labels, current, options.booster, derive_seed(seed, 3 + round));
  }

  auto order = order_by_score(scores, names, current);
  order.resize(std::min(order.size(), options.n_target));
  return make_ranking(SelectionMethod::BoostRfe, order, scores, names);
}

FeatureRanking boost_rfa(const Matrix& x, std::span<const int> labels, std::span<const std::string> names,
                         const BoostSelectOptions& options, std::uint64_t seed) {
  check_inputs(x, labels, names);
  check_options(options);
  std::vector<std::size_t> all(names.size());
  std::iota(all.begin(), all.end(), 0);
  const auto scores = importance(x, labels, all, options.booster, derive_seed(seed, 2));
  const auto order = order_by_score(scores, names, all);

  const std::uint64_t cv_seed = derive_seed(seed, 1);
  std::vector<std::size_t> selected{order.front()};
  double previous = options.n_target > 1 ? subset_auroc(x, labels, selected, options, cv_seed) : 0.0;
  for (std::size_t i = 1; i < order.size() && selected.size() < options.n_target; ++i) {
    auto candidate = selected;
    candidate.push_back(order[i]);
    const double score = subset_auroc(x, labels, candidate, options, cv_seed);
    if (score > previous + options.improvement_eps) {
      previous = score;
      selected = std::move(candidate);
    }
  }
  return make_ranking(SelectionMethod::BoostRfa, selected, scores, names);
}

}  // namespace hyposcreen
