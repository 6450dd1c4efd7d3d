#include "hyposcreen/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <new>
#include <set>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"

#include "hyposcreen/csv.hpp"
#include "hyposcreen/ensemble.hpp"
#include "hyposcreen/error.hpp"
#include "hyposcreen/explain.hpp"
#include "hyposcreen/featurize.hpp"
#include "hyposcreen/parallel.hpp"
#include "hyposcreen/report.hpp"
#include "hyposcreen/rng.hpp"
#include "hyposcreen/stats.hpp"
#include "hyposcreen/synth.hpp"

namespace hyposcreen {

using nlohmann::json;

int exit_code(ErrorCode code) {
  switch (error_category(code)) {
    case ErrorCategory::Usage: return 2;
    case ErrorCategory::Data: return 3;
    case ErrorCategory::Internal: return 4;
  }
  return 4;
}

std::string error_record(ErrorCode code, const std::string& message) {
  static constexpr const char* kCategory[] = {"usage", "data", "internal"};
  const json record{{"error",
                     {{"code", error_code_name(code)},
                      {"category", kCategory[static_cast<int>(error_category(code))]},
                      {"message", message},
                      {"exit_code", exit_code(code)}}}};
  return record.dump();
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

// ---------------------------------------------------------------------------
// Expression subsets
// ---------------------------------------------------------------------------

namespace {

std::optional<Expression> column_expression(std::string_view name) {
  for (auto e : kAllExpressions) {
    const auto prefix = to_string(e);
    if (name.size() > prefix.size() && name.substr(0, prefix.size()) == prefix && name[prefix.size()] == '_')
      return e;
  }
  return std::nullopt;
}

}  // namespace

LabeledDataset restrict_to_expressions(const LabeledDataset& data, const std::vector<Expression>& expressions) {
  std::vector<std::string> keep;
  for (const auto& name : data.feature_names) {
    const auto e = column_expression(name);
    if (!e || std::find(expressions.begin(), expressions.end(), *e) != expressions.end()) keep.push_back(name);
  }
  if (keep.empty()) throw Error(ErrorCode::MissingFeature, "no feature columns for expressions " + subset_label(expressions));
  if (keep.size() == data.feature_names.size()) return data;
  return data.with_features(keep);
}

std::vector<std::vector<Expression>> expression_subsets() {
  using E = Expression;
  return {{E::Smile},           {E::Disgust},           {E::Surprise},
          {E::Smile, E::Disgust}, {E::Smile, E::Surprise}, {E::Disgust, E::Surprise},
          {E::Smile, E::Disgust, E::Surprise}};
}

std::string subset_label(const std::vector<Expression>& subset) {
  std::string out;
  for (auto e : subset) {
    if (!out.empty()) out += '+';
    out += to_string(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CV report
// ---------------------------------------------------------------------------

CvReport make_cv_report(const CvResult& cv, const PipelineConfig& config, std::size_t rows, std::size_t features,
                        std::optional<BootstrapSummary> bootstrap) {
  CvReport r;
  r.config = config;
  r.config_hash = config_hash(config);
  r.folds = cv.plan.k;
  r.seed = cv.plan.seed;
  r.rows = rows;
  r.features = features;
  r.pooled = cv.pooled;
  r.fold_mean = cv.fold_mean;
  for (const auto& f : cv.folds) r.fold_metrics.push_back(metric_values(f.report));
  r.leakage_violations = audit_leakage_violations(cv.audit);
  r.bootstrap = std::move(bootstrap);
  return r;
}

json to_json(const CvReport& r) {
  return {{"kind", "cv_report"},
          {"config", to_json(r.config)},
          {"config_hash", hash_hex(r.config_hash)},
          {"folds", r.folds},
          {"seed", r.seed},
          {"rows", r.rows},
          {"features", r.features},
          {"pooled", to_json(r.pooled)},
          {"fold_mean", r.fold_mean},
          {"fold_metrics", r.fold_metrics},
          {"leakage_violations", r.leakage_violations},
          {"bootstrap", r.bootstrap ? to_json(*r.bootstrap) : json(nullptr)}};
}

CvReport cv_report_from_json(const json& j) {
  try {
    if (j.at("kind") != "cv_report") throw Error(ErrorCode::SchemaViolation, "not a cv report");
    CvReport r;
    r.config = config_from_json(j.at("config"));
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.folds = j.at("folds").get<std::size_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.rows = j.at("rows").get<std::size_t>();
    r.features = j.at("features").get<std::size_t>();
    r.pooled = metric_report_from_json(j.at("pooled"));
    r.fold_mean = j.at("fold_mean").get<std::map<std::string, double>>();
    r.fold_metrics = j.at("fold_metrics").get<std::vector<std::map<std::string, double>>>();
    r.leakage_violations = j.at("leakage_violations").get<std::size_t>();
    if (!j.at("bootstrap").is_null()) r.bootstrap = bootstrap_summary_from_json(j.at("bootstrap"));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("cv report: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::SchemaViolation, "cv report: config_hash is not hex");
  }
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

namespace {

json::json_pointer axis_pointer(const std::string& key) {
  std::string pointer;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    pointer += '/' + key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(pointer);
}

json expression_subset_axis() {
  json values = json::array();
  for (const auto& subset : expression_subsets()) {
    json names = json::array();
    for (auto e : subset) names.push_back(to_string(e));
    values.push_back(names);
  }
  return values;
}

}  // namespace

std::vector<SweepPoint> expand_sweep_grid(const json& grid) {
  auto schema = [](const std::string& what) { throw Error(ErrorCode::SchemaViolation, "sweep grid: " + what); };
  if (!grid.is_object()) schema("must be an object");
  for (const auto& [key, value] : grid.items())
    if (key != "base" && key != "axes" && key != "preset" && key != "folds" && key != "seed" && key != "features")
      schema("unknown key '" + key + "'");

  PipelineConfig base = grid.contains("base") ? config_from_json(grid.at("base")) : PipelineConfig{};
  if (grid.contains("folds")) {
    if (!is_nonnegative_integer(grid.at("folds"))) schema("'folds' must be a positive integer");
    base.folds = grid.at("folds").get<std::size_t>();
  }
  if (grid.contains("seed")) {
    if (!is_nonnegative_integer(grid.at("seed"))) schema("'seed' must be a nonnegative integer");
    base.seed = grid.at("seed").get<std::uint64_t>();
  }
  const json base_json = to_json(base);

  json axes = grid.value("axes", json::object());
  if (!axes.is_object()) schema("'axes' must be an object");
  if (grid.contains("preset")) {
    if (grid.at("preset") != "expression_subsets") schema("unknown preset " + grid.at("preset").dump());
    if (axes.contains("expressions")) schema("preset 'expression_subsets' conflicts with an 'expressions' axis");
    axes["expressions"] = expression_subset_axis();
  }

  std::vector<std::pair<json::json_pointer, const json*>> dims;
  std::vector<std::string> keys;
  for (const auto& [key, values] : axes.items()) {
    const auto pointer = axis_pointer(key);
    if (!base_json.contains(pointer)) schema("unknown axis '" + key + "'");
    if (!values.is_array() || values.empty()) schema("axis '" + key + "' needs a nonempty array of values");
    dims.emplace_back(pointer, &values);
    keys.push_back(key);
  }

  std::size_t total = 1;
  for (const auto& [pointer, values] : dims) total *= values->size();

  std::vector<SweepPoint> points;
  points.reserve(total);
  for (std::size_t i = 0; i < total; ++i) {
    json config_json = base_json;
    json overrides = json::object();
    std::size_t rest = i;
    for (std::size_t a = dims.size(); a-- > 0;) {
      const auto& values = *dims[a].second;
      const json& v = values[rest % values.size()];
      rest /= values.size();
      config_json[dims[a].first] = v;
      overrides[keys[a]] = v;
    }
    SweepPoint p{config_from_json(config_json), std::move(overrides)};
    validate(p.config);
    points.push_back(std::move(p));
  }
  return points;
}

void sort_leaderboard(std::vector<LeaderboardRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const LeaderboardRow& a, const LeaderboardRow& b) {
    const double x = a.metrics.at("auroc"), y = b.metrics.at("auroc");
    if (x != y) return x > y;
    return a.config_hash < b.config_hash;
  });
}

std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
  static constexpr const char* kMetrics[] = {"auroc", "accuracy", "sensitivity", "specificity", "ppv", "npv"};
  std::string out = "rank,config_hash";
  for (const char* m : kMetrics) out += std::string(",") + m;
  out += ",features,point\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += std::to_string(i + 1) + ',' + hash_hex(rows[i].config_hash);
    for (const char* m : kMetrics) {
      out += ',';
      if (auto it = rows[i].metrics.find(m); it != rows[i].metrics.end()) out += csv::format_double(it->second);
    }
    out += ',' + std::to_string(rows[i].features) + ',' + csv::quote_if_needed(rows[i].overrides.dump()) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

PipelineConfig config_or_default(const std::string& path) {
  if (path.empty()) return PipelineConfig{};
  return load_config(path);
}

std::vector<Expression> parse_expression_list(const std::string& text) {
  std::vector<Expression> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto e = parse_expression(csv::trim(item));
    if (!e) throw Error(ErrorCode::UsageError, "unknown expression '" + item + "'");
    if (std::find(out.begin(), out.end(), *e) == out.end()) out.push_back(*e);
  }
  if (out.empty()) throw Error(ErrorCode::UsageError, "expression list is empty");
  std::sort(out.begin(), out.end());
  return out;
}

std::filesystem::path sibling(const std::filesystem::path& out, const std::string& suffix) {
  auto p = out;
  p.replace_extension();
  p += suffix;
  return p;
}

struct FeaturizeArgs {
  std::string manifest, out, config, expressions, landmark_map;
  std::optional<double> min_confidence;
};

int run_featurize(const FeaturizeArgs& a, std::ostream& out) {
  PipelineConfig config = config_or_default(a.config);
  if (!a.expressions.empty()) config.expressions = parse_expression_list(a.expressions);
  if (!a.landmark_map.empty()) config.landmark_map = a.landmark_map;
  if (a.min_confidence) config.min_confidence = *a.min_confidence;
  validate(config);

  FeaturizeOptions options;
  options.expressions = {config.expressions.begin(), config.expressions.end()};
  if (!config.landmark_map.empty()) options.index_map = LandmarkIndexMap::load(config.landmark_map);
  options.entropy.bins = config.entropy_bins;
  if (config.min_confidence > 0.0) options.min_confidence = config.min_confidence;

  const auto result = featurize_manifest(parse_manifest(a.manifest), options);
  write_report(a.out, write_feature_table(result.dataset));
  std::size_t missing = 0;
  for (const auto& v : result.vectors) missing += v.missing.size();
  out << "featurized " << result.dataset.size() << " participants x " << result.dataset.feature_count()
      << " features; " << missing << " cells hold the no-activation sentinel\n";
  return 0;
}

struct TrainArgs {
  std::string features, config, out;
  std::optional<std::uint64_t> seed;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  PipelineConfig config = config_or_default(a.config);
  if (a.seed) config.seed = *a.seed;
  validate(config);
  const auto data = restrict_to_expressions(read_feature_table(a.features), config.expressions);
  TrainedEnsemble model = fit_pipeline(data.features, data.feature_names, data.labels, config, config.seed);
  model.provenance["config"] = to_json(config);
  model.provenance["config_hash"] = hash_hex(config_hash(config));
  model.provenance["threshold"] = config.threshold;
  write_report(a.out, to_json(model).dump() + "\n");
  out << "trained " << model.m() << " base models on " << data.size() << " rows, "
      << model.selected_features.size() << " selected features\n";
  return 0;
}

struct CvArgs {
  std::string features, config, out, roc_csv, roc_svg, preds_out;
  std::optional<std::size_t> folds, seeds;
  std::optional<std::uint64_t> seed;
};

int run_cv(const CvArgs& a, std::ostream& out) {
  PipelineConfig config = config_or_default(a.config);
  if (a.folds) config.folds = *a.folds;
  if (a.seeds) config.bootstrap_seeds = *a.seeds;
  if (a.seed) config.seed = *a.seed;
  validate(config);
  const auto data = restrict_to_expressions(read_feature_table(a.features), config.expressions);

  const CvResult cv = run_cross_validation(data, config, config.folds, config.seed);
  std::optional<BootstrapSummary> bootstrap;
  if (config.bootstrap_seeds >= 2) {
    bootstrap = bootstrap_ci(
        [&](std::size_t s) {
          return metric_values(run_cross_validation(data, config, config.folds, derive_seed(config.seed, s)).pooled);
        },
        config.bootstrap_seeds, 0.95);
  }
  const CvReport report = make_cv_report(cv, config, data.size(), data.feature_count(), std::move(bootstrap));

  write_report(a.out, to_json(report).dump(2) + "\n");
  write_report(a.roc_csv.empty() ? sibling(a.out, ".roc.csv") : std::filesystem::path(a.roc_csv),
               roc_csv(report.pooled.roc));
  write_report(a.roc_svg.empty() ? sibling(a.out, ".roc.svg") : std::filesystem::path(a.roc_svg),
               roc_svg(report.pooled.roc));
  if (!a.preds_out.empty())
    write_report(a.preds_out, predictions_csv(data.participant_ids, cv.oof_scores, config.threshold));

  out << "pooled auroc " << fixed(report.pooled.roc.auroc);
  if (report.pooled.confusion.accuracy) out << " accuracy " << fixed(*report.pooled.confusion.accuracy);
  out << " over " << report.folds << " folds; leakage violations " << report.leakage_violations << "\n";
  if (report.bootstrap) {
    for (const auto& [name, ci] : report.bootstrap->ci)
      out << "  " << name << " 95% CI [" << fixed(ci.lo) << ", " << fixed(ci.hi) << "] over "
          << config.bootstrap_seeds << " seeds\n";
  }
  return 0;
}

struct PredictArgs {
  std::string model, features, out;
  std::optional<double> threshold;
};

int run_predict(const PredictArgs& a, std::ostream& out) {
  const TrainedEnsemble model = load_ensemble(a.model);
  const auto data = read_feature_table(a.features);
  double threshold = 0.5;
  if (model.provenance.is_object() && model.provenance.contains("threshold") &&
      model.provenance.at("threshold").is_number())
    threshold = model.provenance.at("threshold").get<double>();
  if (a.threshold) threshold = *a.threshold;
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::UsageError, "threshold must lie in [0, 1]");
  const auto probs = ensemble_predict(model, data.features, data.feature_names);
  write_report(a.out, predictions_csv(data.participant_ids, probs, threshold));
  std::size_t positive = 0;
  for (double p : probs) positive += p >= threshold;
  out << "predicted " << probs.size() << " rows, " << positive << " at or above threshold " << threshold << "\n";
  return 0;
}

struct BiasArgs {
  std::string preds, features, group, out, summary_csv;
  std::vector<double> bins;
};

int run_bias(const BiasArgs& a, std::ostream& out) {
  const auto table = parse_predictions_csv(csv::read_text(a.preds));
  const auto data = read_feature_table(a.features);
  std::unordered_map<std::string, std::size_t> row_of;
  for (std::size_t r = 0; r < data.size(); ++r)
    if (!row_of.emplace(data.participant_ids[r], r).second)
      throw Error(ErrorCode::DuplicateEntry, "participant '" + data.participant_ids[r] + "' repeats in feature table");

  std::vector<int> labels;
  std::vector<Demographics> demographics;
  for (const auto& id : table.row_ids) {
    const auto it = row_of.find(id);
    if (it == row_of.end()) throw Error(ErrorCode::SchemaViolation, "participant '" + id + "' not in feature table");
    labels.push_back(data.labels[it->second]);
    demographics.push_back(data.demographics[it->second]);
  }
  const BiasReport report = build_bias_report(table.predicted, labels, demographics, {a.group, a.bins});
  write_report(a.out, to_json(report).dump(2) + "\n");
  if (!a.summary_csv.empty()) write_report(a.summary_csv, bias_summary_csv(report));

  out << "bias by " << report.column << ": " << report.rows_used << " rows used, " << report.rows_excluded
      << " excluded\n";
  for (const auto& c : report.comparisons)
    out << "  " << to_string(c.metric) << ' ' << c.group_a << " vs " << c.group_b << ": " << to_string(c.result.test)
        << " p=" << fixed(c.result.p_value) << (c.result.preconditions_met ? "" : " (preconditions not met)") << "\n";
  return 0;
}

struct ExplainArgs {
  std::string model, features, out;
  std::size_t top = 10;
};

int run_explain(const ExplainArgs& a, std::ostream& out) {
  const TrainedEnsemble model = load_ensemble(a.model);
  const auto data = read_feature_table(a.features);
  const auto columns = column_indices(data.feature_names, model.selected_features);
  const Matrix raw = data.features.select_cols(columns);
  const Matrix scaled = apply_scaler(model.scaler, raw, model.selected_features);
  const BoostedModel& best = best_base_model(model).model;

  std::vector<ShapAttribution> shap(scaled.rows());
  parallel_for(scaled.rows(), [&](std::size_t r) { shap[r] = tree_shap(best, scaled.row(r), r); });
  write_report(a.out, shap_csv(shap, data.participant_ids, model.selected_features, raw));

  std::vector<double> importance(model.selected_features.size(), 0.0);
  for (const auto& s : shap)
    for (std::size_t f = 0; f < importance.size(); ++f) importance[f] += std::abs(s.values[f]);
  std::vector<std::size_t> order(importance.size());
  for (std::size_t f = 0; f < order.size(); ++f) order[f] = f;
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return importance[x] > importance[y]; });
  out << "mean |shap| (best base model, candidate " << best_base_model(model).candidate_index << "):\n";
  const double n = std::max<double>(1.0, static_cast<double>(shap.size()));
  for (std::size_t i = 0; i < std::min(a.top, order.size()); ++i)
    out << "  " << model.selected_features[order[i]] << ' ' << fixed(importance[order[i]] / n, 6) << "\n";
  return 0;
}

struct ProjectArgs {
  std::string features, out, subset;
};

int run_project(const ProjectArgs& a, std::ostream& out) {
  const auto data = read_feature_table(a.features);
  std::set<Expression> present;
  for (const auto& name : data.feature_names)
    if (auto e = column_expression(name)) present.insert(*e);

  auto silhouette_line = [&](const std::string& label, const LabeledDataset& d) {
    out << label << ' ' << d.feature_count() << " features silhouette ";
    try {
      const auto p = pca_project(d.features, 2);
      out << fixed(silhouette_score(p.coordinates, d.labels)) << "\n";
    } catch (const Error& e) {
      out << "n/a (" << error_code_name(e.code()) << ")\n";
    }
  };

  if (present.empty()) {
    silhouette_line("all", data);
  } else {
    for (const auto& subset : expression_subsets()) {
      if (!std::all_of(subset.begin(), subset.end(), [&](Expression e) { return present.count(e) > 0; })) continue;
      silhouette_line(subset_label(subset), restrict_to_expressions(data, subset));
    }
  }

  const LabeledDataset chosen =
      a.subset.empty() ? data : restrict_to_expressions(data, parse_expression_list(a.subset));
  const auto projection = pca_project(chosen.features, 2);
  write_report(a.out, projection_csv(projection, chosen.participant_ids, chosen.labels));
  out << "explained variance " << fixed(projection.explained[0]) << ' ' << fixed(projection.explained[1]) << "\n";
  return 0;
}

struct SimulateArgs {
  std::size_t n = 1000;
  double delta = 2.0;
  std::size_t dims = 10;
  std::size_t informative = 1;
  double subgroup_effect = 0.0;
  std::uint64_t seed = 0;
  std::string out;
};

int run_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.n < 2 || a.n % 2 != 0) throw Error(ErrorCode::UsageError, "--n must be an even count of at least 2");
  SyntheticSpec spec;
  spec.n_per_class = a.n / 2;
  spec.delta = a.delta;
  spec.dims = a.dims;
  spec.informative = a.informative;
  spec.seed = a.seed;
  spec.subgroup_effect = a.subgroup_effect;
  const auto data = generate_synthetic_dataset(spec);
  write_report(a.out, write_feature_table(data));
  out << "simulated " << data.size() << " rows x " << data.feature_count() << " features, delta " << a.delta << "\n";
  return 0;
}

struct SweepArgs {
  std::string grid, out, features, preset;
  std::optional<std::size_t> folds;
  std::optional<std::uint64_t> seed;
};

int run_sweep(const SweepArgs& a, std::ostream& out) {
  json grid;
  try {
    grid = json::parse(csv::read_text(a.grid));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("sweep grid is not JSON: ") + e.what());
  }
  if (!a.preset.empty()) grid["preset"] = a.preset;

  std::filesystem::path features = a.features;
  if (features.empty()) {
    if (!grid.contains("features") || !grid.at("features").is_string())
      throw Error(ErrorCode::UsageError, "sweep needs --features or a 'features' entry in the grid");
    features = grid.at("features").get<std::string>();
    if (features.is_relative()) features = std::filesystem::path(a.grid).parent_path() / features;
  }

  auto points = expand_sweep_grid(grid);
  for (auto& p : points) {
    if (a.folds) p.config.folds = *a.folds;
    if (a.seed) p.config.seed = *a.seed;
    validate(p.config);
  }
  const auto data = read_feature_table(features);

  std::vector<LeaderboardRow> rows(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    const auto& cfg = points[i].config;
    const auto subset = restrict_to_expressions(data, cfg.expressions);
    const auto cv = run_cross_validation(subset, cfg, cfg.folds, cfg.seed);
    rows[i] = {config_hash(cfg), points[i].overrides, subset.feature_count(), metric_values(cv.pooled)};
  });
  sort_leaderboard(rows);
  write_report(a.out, leaderboard_csv(rows));
  out << "swept " << rows.size() << " points; best auroc " << fixed(rows.front().metrics.at("auroc")) << " at "
      << rows.front().overrides.dump() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hypomimia screening pipeline: features, stacking ensemble, evaluation, bias and explanations",
               "hyposcreen"};
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "Worker threads (default: HYPOSCREEN_THREADS or 1)")
      ->check(CLI::PositiveNumber);

  FeaturizeArgs fz;
  auto* featurize = app.add_subcommand("featurize", "Build the feature table from a recording manifest");
  featurize->add_option("--manifest", fz.manifest, "Manifest CSV")->required();
  featurize->add_option("--out", fz.out, "Feature table CSV to write")->required();
  featurize->add_option("--config", fz.config, "Pipeline config JSON");
  featurize->add_option("--expressions", fz.expressions, "Comma-separated subset of smile,disgust,surprise");
  featurize->add_option("--landmark-map", fz.landmark_map, "Landmark index map JSON");
  featurize->add_option("--min-confidence", fz.min_confidence, "Drop frames below this tracking confidence");

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Fit the full pipeline on every row");
  train->add_option("--features", tr.features, "Feature table CSV")->required();
  train->add_option("--config", tr.config, "Pipeline config JSON");
  train->add_option("--out", tr.out, "Model JSON to write")->required();
  train->add_option("--seed", tr.seed, "Master seed (default: config seed)");

  CvArgs cva;
  auto* cv = app.add_subcommand("cv", "Stratified k-fold evaluation with seed-bootstrap intervals");
  cv->add_option("--features", cva.features, "Feature table CSV")->required();
  cv->add_option("--config", cva.config, "Pipeline config JSON");
  cv->add_option("--folds", cva.folds, "Number of folds")->check(CLI::Range(2, 1000000));
  cv->add_option("--seeds", cva.seeds, "Bootstrap seeds; 1 skips the intervals");
  cv->add_option("--seed", cva.seed, "Master seed (default: config seed)");
  cv->add_option("--out", cva.out, "Report JSON to write")->required();
  cv->add_option("--roc-csv", cva.roc_csv, "ROC CSV (default: <out>.roc.csv)");
  cv->add_option("--roc-svg", cva.roc_svg, "ROC SVG (default: <out>.roc.svg)");
  cv->add_option("--preds-out", cva.preds_out, "Out-of-fold predictions CSV");

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Score rows with a trained model");
  predict->add_option("--model", pr.model, "Model JSON")->required();
  predict->add_option("--features", pr.features, "Feature table CSV")->required();
  predict->add_option("--out", pr.out, "Predictions CSV to write")->required();
  predict->add_option("--threshold", pr.threshold, "Decision threshold (default: the model's)");

  BiasArgs bi;
  auto* bias = app.add_subcommand("bias", "Subgroup error rates and significance tests");
  bias->add_option("--preds", bi.preds, "Predictions CSV")->required();
  bias->add_option("--features", bi.features, "Feature table CSV with labels and demographics")->required();
  bias->add_option("--group", bi.group, "cohort, sex, ethnicity, age or disease_duration")->required();
  bias->add_option("--bins", bi.bins, "Bin edges for a continuous column")->delimiter(',');
  bias->add_option("--out", bi.out, "Bias report JSON to write")->required();
  bias->add_option("--summary-csv", bi.summary_csv, "Per-subgroup rates CSV");

  ExplainArgs ex;
  auto* explain = app.add_subcommand("explain", "TreeSHAP attributions from the best base model");
  explain->add_option("--model", ex.model, "Model JSON")->required();
  explain->add_option("--features", ex.features, "Feature table CSV")->required();
  explain->add_option("--out", ex.out, "SHAP CSV to write")->required();
  explain->add_option("--top", ex.top, "Features to list by mean |SHAP|");

  ProjectArgs pj;
  auto* project = app.add_subcommand("project", "PCA projection and silhouette per expression subset");
  project->add_option("--features", pj.features, "Feature table CSV")->required();
  project->add_option("--out", pj.out, "Projection CSV to write")->required();
  project->add_option("--subset", pj.subset, "Expressions to project (default: all columns)");

  SimulateArgs si;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic two-class Gaussian cohort");
  simulate->add_option("--n", si.n, "Total rows, split evenly between classes");
  simulate->add_option("--delta", si.delta, "Class mean shift on informative dims");
  simulate->add_option("--dims", si.dims, "Feature count");
  simulate->add_option("--informative", si.informative, "Dims carrying the shift");
  simulate->add_option("--subgroup-effect", si.subgroup_effect, "Separation shrink for female rows, in [0, 1]");
  simulate->add_option("--seed", si.seed, "Generator seed");
  simulate->add_option("--out", si.out, "Feature table CSV to write")->required();

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "CV every point of a config grid and rank by AUROC");
  sweep->add_option("--grid", sw.grid, "Sweep grid JSON")->required();
  sweep->add_option("--out", sw.out, "Leaderboard CSV to write")->required();
  sweep->add_option("--features", sw.features, "Feature table CSV (default: the grid's)");
  sweep->add_option("--preset", sw.preset, "expression_subsets");
  sweep->add_option("--folds", sw.folds, "Folds per point")->check(CLI::Range(2, 1000000));
  sweep->add_option("--seed", sw.seed, "Seed for every point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << app.help() << error_record(ErrorCode::UsageError, e.what()) << "\n";
    return 2;
  }

  try {
    if (threads) set_thread_count(*threads);
    if (*featurize) return run_featurize(fz, out);
    if (*train) return run_train(tr, out);
    if (*cv) return run_cv(cva, out);
    if (*predict) return run_predict(pr, out);
    if (*bias) return run_bias(bi, out);
    if (*explain) return run_explain(ex, out);
    if (*project) return run_project(pj, out);
    if (*simulate) return run_simulate(si, out);
    if (*sweep) return run_sweep(sw, out);
    throw Error(ErrorCode::UsageError, "no subcommand");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UsageError) err << app.help();
    err << error_record(e.code(), e.what()) << "\n";
    return exit_code(e.code());
  } catch (const json::exception& e) {
    err << error_record(ErrorCode::SchemaViolation, e.what()) << "\n";
    return exit_code(ErrorCode::SchemaViolation);
  } catch (const std::bad_alloc&) {
    err << error_record(ErrorCode::InternalError, "out of memory") << "\n";
    return exit_code(ErrorCode::InternalError);
  } catch (const std::exception& e) {
    err << error_record(ErrorCode::InternalError, e.what()) << "\n";
    return exit_code(ErrorCode::InternalError);
  }
}

}  // namespace hyposcreen
