#include "hyposcreen/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "hyposcreen/ensemble.hpp"
#include "hyposcreen/error.hpp"
#include "hyposcreen/parallel.hpp"
#include "hyposcreen/rng.hpp"

namespace hyposcreen {

using nlohmann::json;

MetricReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold) {
  return {roc_auroc(scores, labels), confusion_metrics(scores, labels, threshold)};
}

std::map<std::string, double> metric_values(const MetricReport& report) {
  std::map<std::string, double> out{{"auroc", report.roc.auroc}};
  const auto& c = report.confusion;
  auto put = [&](const char* name, const std::optional<double>& v) {
    if (v) out[name] = *v;
  };
  put("accuracy", c.accuracy);
  put("sensitivity", c.sensitivity);
  put("specificity", c.specificity);
  put("ppv", c.ppv);
  put("npv", c.npv);
  return out;
}

std::string row_identity(const LabeledDataset& data, std::size_t row) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(data.participant_ids[row])));
  return buf;
}

CvResult run_cross_validation(const LabeledDataset& data, const PipelineConfig& config, std::size_t k,
                              std::uint64_t seed) {
  validate(config);
  CvResult result;
  result.plan = stratified_kfold(data.labels, k, seed);
  result.folds.resize(k);
  std::vector<PipelineTrace> traces(k);
  std::vector<std::vector<std::size_t>> train_rows(k);

  parallel_for(k, [&](std::size_t f) {
    train_rows[f] = result.plan.train_indices(f);
    const auto test = result.plan.test_indices(f);
    const auto train_data = data.subset(train_rows[f]);
    const auto ensemble = fit_pipeline(train_data.features, train_data.feature_names, train_data.labels, config,
                                       derive_seed(seed, 500 + f), &traces[f]);
    auto& fold = result.folds[f];
    fold.fold = f;
    fold.test_rows = test;
    fold.scores = ensemble_predict(ensemble, data.features.select_rows(test), data.feature_names);
    std::vector<int> y;
    for (auto i : test) y.push_back(data.labels[i]);
    fold.report = evaluate_scores(fold.scores, y, config.threshold);
    fold.synthetic_rows = traces[f].stacking.final_synthetic;
  });

  result.oof_scores.assign(data.size(), 0.0);
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& fold : result.folds) {
    for (std::size_t i = 0; i < fold.test_rows.size(); ++i) result.oof_scores[fold.test_rows[i]] = fold.scores[i];
    for (const auto& [name, v] : metric_values(fold.report)) {
      sums[name].first += v;
      sums[name].second += 1;
    }
  }
  for (const auto& [name, s] : sums) result.fold_mean[name] = s.first / static_cast<double>(s.second);
  result.pooled = evaluate_scores(result.oof_scores, data.labels, config.threshold);

  for (std::size_t f = 0; f < k; ++f) {
    json train_ids = json::array();
    for (auto r : train_rows[f]) train_ids.push_back(row_identity(data, r));
    json test_ids = json::array();
    for (auto r : result.folds[f].test_rows) test_ids.push_back(row_identity(data, r));
    const auto& st = traces[f].stacking;
    result.audit.push_back({{"event", "fit"}, {"stage", "scaler"}, {"fold", f}, {"rows", train_ids},
                            {"synthetic_rows", 0}});
    result.audit.push_back({{"event", "fit"},
                            {"stage", "model"},
                            {"fold", f},
                            {"rows", train_ids},
                            {"selected", traces[f].ranking.top(std::min(config.selection.n, data.feature_count()))},
                            {"inner_synthetic_rows", st.inner_synthetic},
                            {"synthetic_rows", st.final_synthetic}});
    result.audit.push_back({{"event", "evaluate"}, {"fold", f}, {"rows", test_ids}, {"synthetic_rows", 0}});
  }
  return result;
}

std::size_t audit_leakage_violations(std::span<const json> audit) {
  std::map<std::size_t, std::set<std::string>> fitted;
  for (const auto& e : audit)
    if (e.at("event") == "fit")
      for (const auto& r : e.at("rows")) fitted[e.at("fold").get<std::size_t>()].insert(r.get<std::string>());
  std::size_t violations = 0;
  for (const auto& e : audit) {
    if (e.at("event") != "evaluate") continue;
    if (e.at("synthetic_rows").get<std::size_t>() != 0) ++violations;
    const auto& seen = fitted[e.at("fold").get<std::size_t>()];
    for (const auto& r : e.at("rows"))
      if (seen.count(r.get<std::string>())) ++violations;
  }
  return violations;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::Empty, "percentile of no values");
  if (!(q >= 0.0 && q <= 100.0)) throw Error(ErrorCode::OutOfRange, "percentile must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

BootstrapSummary bootstrap_ci(const std::function<std::map<std::string, double>(std::size_t)>& run,
                              std::size_t n_seeds, double level) {
  if (n_seeds < 2) throw Error(ErrorCode::DegenerateParams, "bootstrap needs at least 2 seeds");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::DegenerateParams, "level must lie in (0, 1)");
  std::vector<std::map<std::string, double>> runs(n_seeds);
  parallel_for(n_seeds, [&](std::size_t s) { runs[s] = run(s); });

  BootstrapSummary out;
  for (const auto& r : runs)
    for (const auto& [name, v] : r) out.values[name].push_back(v);
  const double tail = 50.0 * (1.0 - level);
  for (const auto& [name, v] : out.values) {
    out.ci[name] = {percentile(v, tail), percentile(v, 100.0 - tail)};
    double sum = 0.0;
    for (double x : v) sum += x;
    out.mean[name] = sum / static_cast<double>(v.size());
  }
  return out;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

json to_json(const MetricReport& r) {
  const auto& c = r.confusion;
  json points = json::array();
  for (const auto& p : r.roc.points)
    points.push_back({p.fpr, p.tpr, std::isfinite(p.threshold) ? json(p.threshold) : json(nullptr)});
  return {{"auroc", r.roc.auroc},
          {"accuracy", optional_json(c.accuracy)},
          {"sensitivity", optional_json(c.sensitivity)},
          {"specificity", optional_json(c.specificity)},
          {"ppv", optional_json(c.ppv)},
          {"npv", optional_json(c.npv)},
          {"confusion",
           {{"tp", c.counts.tp}, {"fp", c.counts.fp}, {"tn", c.counts.tn}, {"fn", c.counts.fn},
            {"threshold", c.counts.threshold}}},
          {"roc_points", points}};
}

MetricReport metric_report_from_json(const json& j) {
  try {
    MetricReport r;
    r.roc.auroc = j.at("auroc").get<double>();
    for (const auto& p : j.at("roc_points"))
      r.roc.points.push_back({p.at(0).get<double>(), p.at(1).get<double>(),
                              p.at(2).is_null() ? std::numeric_limits<double>::infinity() : p.at(2).get<double>()});
    auto& c = r.confusion;
    const auto& counts = j.at("confusion");
    c.counts = {counts.at("tp").get<std::size_t>(), counts.at("fp").get<std::size_t>(),
                counts.at("tn").get<std::size_t>(), counts.at("fn").get<std::size_t>(),
                counts.at("threshold").get<double>()};
    c.accuracy = optional_from(j.at("accuracy"));
    c.sensitivity = optional_from(j.at("sensitivity"));
    c.specificity = optional_from(j.at("specificity"));
    c.ppv = optional_from(j.at("ppv"));
    c.npv = optional_from(j.at("npv"));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("metric report: ") + e.what());
  }
}

json to_json(const CvResult& r) {
  json folds = json::array();
  for (const auto& f : r.folds)
    folds.push_back({{"fold", f.fold}, {"test_rows", f.test_rows.size()}, {"synthetic_training_rows", f.synthetic_rows},
                     {"metrics", to_json(f.report)}});
  return {{"k", r.plan.k}, {"seed", r.plan.seed}, {"pooled", to_json(r.pooled)}, {"fold_mean", r.fold_mean},
          {"folds", folds}};
}

json to_json(const BootstrapSummary& s) {
  json out = json::object();
  for (const auto& [name, values] : s.values) {
    const auto& ci = s.ci.at(name);
    out[name] = {{"mean", s.mean.at(name)},
                 {"ci_lo", ci.lo},
                 {"ci_hi", ci.hi},
                 {"half_width", 0.5 * (ci.hi - ci.lo)},
                 {"values", values}};
  }
  return out;
}

BootstrapSummary bootstrap_summary_from_json(const json& j) {
  try {
    BootstrapSummary s;
    for (const auto& [name, entry] : j.items()) {
      s.values[name] = entry.at("values").get<std::vector<double>>();
      s.ci[name] = {entry.at("ci_lo").get<double>(), entry.at("ci_hi").get<double>()};
      s.mean[name] = entry.at("mean").get<double>();
    }
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("bootstrap summary: ") + e.what());
  }
}

}  // namespace hyposcreen
