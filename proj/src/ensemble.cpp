#include "hyposcreen/ensemble.hpp"

#include <algorithm>
#include <numeric>

#include "hyposcreen/csv.hpp"
#include "hyposcreen/dataset.hpp"
#include "hyposcreen/error.hpp"
#include "hyposcreen/metrics.hpp"
#include "hyposcreen/parallel.hpp"
#include "hyposcreen/rng.hpp"

namespace hyposcreen {

using nlohmann::json;

std::vector<std::size_t> select_top_models(std::span<const double> aurocs, std::size_t m) {
  if (m > aurocs.size())
    throw Error(ErrorCode::MTooLarge, "m = " + std::to_string(m) + " exceeds " + std::to_string(aurocs.size()) +
                                          " candidates");
  std::vector<std::size_t> order(aurocs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return aurocs[a] > aurocs[b]; });
  order.resize(m);
  return order;
}

Matrix meta_features(std::span<const BaseLearner> base, const Matrix& rows) {
  Matrix out(rows.rows(), base.size());
  for (std::size_t j = 0; j < base.size(); ++j) {
    const auto p = predict_proba(base[j].model, rows);
    for (std::size_t r = 0; r < rows.rows(); ++r) out(r, j) = p[r];
  }
  return out;
}

namespace {

struct TrainingSet {
  Matrix x;
  std::vector<int> y;
  std::size_t synthetic = 0;
};

TrainingSet training_set(const Matrix& x, std::span<const int> y, const StackingOptions& options,
                         std::uint64_t seed) {
  if (!options.smote) return {x, {y.begin(), y.end()}, 0};
  auto balanced = balance_with_smote(x, y, options.smote_k, seed);
  return {std::move(balanced.features), std::move(balanced.labels), balanced.synthetic_count};
}

}  // namespace

StackingFit fit_stacking_ensemble(const Matrix& x, std::span<const int> labels, const StackingOptions& options,
                                  std::uint64_t seed) {
  if (x.rows() != labels.size()) throw Error(ErrorCode::LengthMismatch, "row count differs from label count");
  require_both_classes(labels);
  if (options.grid.empty()) throw Error(ErrorCode::DegenerateParams, "candidate grid is empty");
  if (options.m < 1) throw Error(ErrorCode::DegenerateParams, "m must be >= 1");
  if (options.m > options.grid.size())
    throw Error(ErrorCode::MTooLarge, "m = " + std::to_string(options.m) + " exceeds grid size " +
                                          std::to_string(options.grid.size()));

  const std::size_t n = x.rows();
  const std::size_t grid = options.grid.size();
  const std::size_t folds = options.inner_folds;
  const auto plan = stratified_kfold(labels, folds, derive_seed(seed, 11));

  StackingFit fit;
  fit.trace.inner_fold = plan.assignments;
  for (std::size_t c = 0; c < grid; ++c) fit.trace.candidate_seeds.push_back(derive_seed(seed, 100 + c));

  std::vector<TrainingSet> train_sets(folds);
  std::vector<std::vector<std::size_t>> test_rows(folds);
  for (std::size_t f = 0; f < folds; ++f) {
    const auto train = plan.train_indices(f);
    std::vector<int> y;
    for (auto i : train) y.push_back(labels[i]);
    train_sets[f] = training_set(x.select_rows(train), y, options, derive_seed(seed, 200 + f));
    test_rows[f] = plan.test_indices(f);
    fit.trace.inner_synthetic.push_back(train_sets[f].synthetic);
  }

  std::vector<std::vector<double>> oof(grid, std::vector<double>(n, 0.0));
  parallel_for(folds * grid, [&](std::size_t task) {
    const std::size_t f = task / grid;
    const std::size_t c = task % grid;
    const auto model = fit_histgbm(train_sets[f].x, train_sets[f].y, options.grid[c], fit.trace.candidate_seeds[c]);
    const auto p = predict_proba(model, x.select_rows(test_rows[f]));
    for (std::size_t i = 0; i < p.size(); ++i) oof[c][test_rows[f][i]] = p[i];
  });

  fit.trace.candidate_aurocs.resize(grid);
  for (std::size_t c = 0; c < grid; ++c) fit.trace.candidate_aurocs[c] = auroc(oof[c], labels);
  const auto top = select_top_models(fit.trace.candidate_aurocs, options.m);

  Matrix meta_x(n, top.size());
  for (std::size_t j = 0; j < top.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) meta_x(i, j) = oof[top[j]][i];
  fit.meta = fit_logistic(meta_x, labels, options.meta_l2);

  const auto all = training_set(x, labels, options, derive_seed(seed, 300));
  fit.trace.final_synthetic = all.synthetic;
  fit.base.resize(top.size());
  parallel_for(top.size(), [&](std::size_t j) {
    const std::size_t c = top[j];
    fit.base[j] = {fit_histgbm(all.x, all.y, options.grid[c], fit.trace.candidate_seeds[c]),
                   fit.trace.candidate_aurocs[c], c};
  });
  return fit;
}

TrainedEnsemble fit_pipeline(const Matrix& x, std::span<const std::string> names, std::span<const int> labels,
                             const PipelineConfig& config, std::uint64_t seed, PipelineTrace* trace) {
  validate(config);
  if (x.cols() != names.size()) throw Error(ErrorCode::ColumnMismatch, "name count differs from matrix width");
  if (x.rows() != labels.size()) throw Error(ErrorCode::LengthMismatch, "row count differs from label count");
  require_both_classes(labels);

  const std::vector<std::string> all_names(names.begin(), names.end());
  const auto scaler = fit_scaler(config.scaler, x, all_names);
  const Matrix scaled = apply_scaler(scaler, x, all_names);

  const std::size_t n_keep = std::min(config.selection.n, names.size());
  FeatureRanking ranking;
  if (config.selection.method == SelectionMethod::LrCoef) {
    ranking = rank_features_lr(scaled, labels, all_names, config.selection.l2_strength);
  } else {
    BoostSelectOptions options;
    options.n_target = n_keep;
    options.inner_folds = config.selection.inner_folds;
    options.improvement_eps = config.selection.improvement_eps;
    options.booster = config.selection.booster;
    const auto select_seed = derive_seed(seed, 21);
    ranking = config.selection.method == SelectionMethod::BoostRfe
                  ? boost_rfe(scaled, labels, all_names, options, select_seed)
                  : boost_rfa(scaled, labels, all_names, options, select_seed);
  }
  const auto selected = ranking.top(n_keep);
  const auto columns = column_indices(all_names, selected);

  StackingOptions options;
  options.grid = config.ensemble.grid;
  options.m = config.ensemble.m;
  options.inner_folds = config.ensemble.inner_folds;
  options.meta_l2 = config.ensemble.meta_l2;
  options.smote = config.smote.enabled;
  options.smote_k = config.smote.k_neighbors;
  auto stack = fit_stacking_ensemble(scaled.select_cols(columns), labels, options, derive_seed(seed, 31));

  TrainedEnsemble out;
  out.scaler.kind = scaler.kind;
  out.scaler.feature_names = selected;
  for (auto c : columns) {
    out.scaler.first.push_back(scaler.first[c]);
    out.scaler.second.push_back(scaler.second[c]);
  }
  out.selected_features = selected;
  out.base = std::move(stack.base);
  out.meta = std::move(stack.meta);

  json candidates = json::array();
  for (std::size_t c = 0; c < options.grid.size(); ++c)
    candidates.push_back({{"index", c},
                          {"params", to_json(options.grid[c])},
                          {"seed", stack.trace.candidate_seeds[c]},
                          {"oof_auroc", stack.trace.candidate_aurocs[c]}});
  std::size_t positives = 0;
  for (int y : labels) positives += y == 1;
  out.provenance = {{"seed", seed},
                    {"training_rows", labels.size()},
                    {"training_positives", positives},
                    {"input_features", names.size()},
                    {"scaler", to_string(config.scaler)},
                    {"selection", to_json(ranking)},
                    {"selection_n", n_keep},
                    {"smote", {{"enabled", config.smote.enabled}, {"k_neighbors", config.smote.k_neighbors},
                               {"synthetic_rows", stack.trace.final_synthetic}}},
                    {"inner_folds", options.inner_folds},
                    {"meta_l2", options.meta_l2},
                    {"candidates", candidates}};

  if (trace) {
    trace->ranking = std::move(ranking);
    trace->stacking = std::move(stack.trace);
  }
  return out;
}

std::vector<double> ensemble_predict(const TrainedEnsemble& ensemble, const Matrix& rows,
                                     std::span<const std::string> names) {
  const auto columns = column_indices(names, ensemble.selected_features);
  const Matrix scaled = apply_scaler(ensemble.scaler, rows.select_cols(columns), ensemble.selected_features);
  const Matrix meta_x = meta_features(ensemble.base, scaled);
  return predict_proba(ensemble.meta, meta_x);
}

const BaseLearner& best_base_model(const TrainedEnsemble& ensemble) {
  if (ensemble.base.empty()) throw Error(ErrorCode::Empty, "ensemble has no base models");
  return ensemble.base.front();
}

json to_json(const FittedScaler& s) {
  return {{"kind", to_string(s.kind)}, {"features", s.feature_names}, {"first", s.first}, {"second", s.second}};
}

FittedScaler scaler_from_json(const json& j) {
  try {
    FittedScaler s;
    const auto kind = parse_scaler_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::SchemaViolation, "unknown scaler kind");
    s.kind = *kind;
    s.feature_names = j.at("features").get<std::vector<std::string>>();
    s.first = j.at("first").get<std::vector<double>>();
    s.second = j.at("second").get<std::vector<double>>();
    if (s.first.size() != s.feature_names.size() || s.second.size() != s.feature_names.size())
      throw Error(ErrorCode::SchemaViolation, "scaler parameter count differs from feature count");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("scaler: ") + e.what());
  }
}

json to_json(const TrainedEnsemble& e) {
  json base = json::array();
  for (const auto& b : e.base)
    base.push_back({{"validation_auroc", b.validation_auroc}, {"candidate_index", b.candidate_index},
                    {"model", to_json(b.model)}});
  return {{"schema_version", kEnsembleSchemaVersion},
          {"kind", "stacking_ensemble"},
          {"scaler", to_json(e.scaler)},
          {"selected_features", e.selected_features},
          {"base_models", base},
          {"meta", to_json(e.meta)},
          {"provenance", e.provenance}};
}

TrainedEnsemble ensemble_from_json(const json& j) {
  if (!j.is_object() || j.value("kind", "") != "stacking_ensemble")
    throw Error(ErrorCode::SchemaViolation, "not a stacking ensemble artifact");
  if (j.value("schema_version", 0) != kEnsembleSchemaVersion)
    throw Error(ErrorCode::SchemaViolation, "unsupported ensemble schema_version");
  try {
    TrainedEnsemble e;
    e.scaler = scaler_from_json(j.at("scaler"));
    e.selected_features = j.at("selected_features").get<std::vector<std::string>>();
    for (const auto& b : j.at("base_models"))
      e.base.push_back({boosted_from_json(b.at("model")), b.at("validation_auroc").get<double>(),
                        b.at("candidate_index").get<std::size_t>()});
    e.meta = logistic_from_json(j.at("meta"));
    e.provenance = j.at("provenance");
    if (e.meta.weights.size() != e.base.size())
      throw Error(ErrorCode::SchemaViolation, "meta weight count differs from base model count");
    if (e.scaler.feature_names != e.selected_features)
      throw Error(ErrorCode::SchemaViolation, "scaler features differ from selected features");
    for (const auto& b : e.base)
      if (b.model.feature_count != e.selected_features.size())
        throw Error(ErrorCode::SchemaViolation, "base model width differs from selected feature count");
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::SchemaViolation, std::string("ensemble: ") + ex.what());
  }
}

void save_ensemble(const TrainedEnsemble& ensemble, const std::filesystem::path& path) {
  csv::write_text(path, to_json(ensemble).dump() + "\n");
}

TrainedEnsemble load_ensemble(const std::filesystem::path& path) {
  const auto text = csv::read_text(path);
  try {
    return ensemble_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, "model file is not valid JSON: " + std::string(e.what()));
  }
}

}  // namespace hyposcreen
