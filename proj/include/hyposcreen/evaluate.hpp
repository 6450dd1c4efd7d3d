#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyposcreen/config.hpp"
#include "hyposcreen/dataset.hpp"
#include "hyposcreen/metrics.hpp"
#include "hyposcreen/preprocess.hpp"

namespace hyposcreen {

struct MetricReport {
  RocCurve roc;
  ConfusionMetrics confusion;
  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

MetricReport evaluate_scores(std::span<const double> scores, std::span<const int> labels, double threshold);

// Named scalar metrics (auroc, accuracy, ...); undefined ones are omitted.
std::map<std::string, double> metric_values(const MetricReport& report);

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::size_t> test_rows;
  std::vector<double> scores;  // aligned with test_rows
  MetricReport report;
  std::size_t synthetic_rows = 0;
};

struct CvResult {
  FoldPlan plan;
  std::vector<FoldResult> folds;
  std::vector<double> oof_scores;  // per dataset row
  MetricReport pooled;
  std::map<std::string, double> fold_mean;
  std::vector<nlohmann::json> audit;  // one record per fit/evaluate event
};

// Row identity used in audit logs: FNV-1a of the participant id, as hex.
std::string row_identity(const LabeledDataset& data, std::size_t row);

// Fits the whole pipeline on each training split and scores the held-out fold.
CvResult run_cross_validation(const LabeledDataset& data, const PipelineConfig& config, std::size_t k,
                              std::uint64_t seed);

// Number of audit violations: evaluation rows that also appear in a fit event
// of the same fold, or evaluation events that carry synthetic rows.
std::size_t audit_leakage_violations(std::span<const nlohmann::json> audit);

// Linear interpolation between order statistics; q in [0, 100].
double percentile(std::vector<double> values, double q);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct BootstrapSummary {
  std::map<std::string, std::vector<double>> values;  // per seed, in seed order
  std::map<std::string, Interval> ci;
  std::map<std::string, double> mean;
  friend bool operator==(const BootstrapSummary&, const BootstrapSummary&) = default;
};

// Runs `run(seed_index)` for every seed and reports per-metric percentile
// intervals at the given level.
BootstrapSummary bootstrap_ci(const std::function<std::map<std::string, double>(std::size_t)>& run,
                              std::size_t n_seeds = 40, double level = 0.95);

// ROC thresholds of +inf are written as null.
nlohmann::json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CvResult& result);
nlohmann::json to_json(const BootstrapSummary& summary);
BootstrapSummary bootstrap_summary_from_json(const nlohmann::json& j);

}  // namespace hyposcreen
