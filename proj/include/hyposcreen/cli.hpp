#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyposcreen/config.hpp"
#include "hyposcreen/dataset.hpp"
#include "hyposcreen/error.hpp"
#include "hyposcreen/evaluate.hpp"

namespace hyposcreen {

// Exit status for an error: 2 usage, 3 data, 4 internal.
int exit_code(ErrorCode code);

// {"error": {"code", "category", "message", "exit_code"}} on one line.
std::string error_record(ErrorCode code, const std::string& message);

// Parses argv and runs one subcommand. Never throws; errors are reported on
// err as an error record and mapped to an exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Keeps columns named "<expression>_..." for the given expressions. Columns
// that carry no expression prefix (synthetic data) are always kept. Throws
// MissingFeature if nothing remains.
LabeledDataset restrict_to_expressions(const LabeledDataset& data, const std::vector<Expression>& expressions);

// The seven nonempty expression subsets: singles, pairs, then all three.
std::vector<std::vector<Expression>> expression_subsets();
std::string subset_label(const std::vector<Expression>& subset);

// Everything a `cv` run reports. Round-trips through JSON.
struct CvReport {
  PipelineConfig config;
  std::uint64_t config_hash = 0;
  std::size_t folds = 0;
  std::uint64_t seed = 0;
  std::size_t rows = 0;
  std::size_t features = 0;
  MetricReport pooled;
  std::map<std::string, double> fold_mean;
  std::vector<std::map<std::string, double>> fold_metrics;
  std::size_t leakage_violations = 0;
  std::optional<BootstrapSummary> bootstrap;

  friend bool operator==(const CvReport&, const CvReport&) = default;
};

CvReport make_cv_report(const CvResult& cv, const PipelineConfig& config, std::size_t rows, std::size_t features,
                        std::optional<BootstrapSummary> bootstrap);
nlohmann::json to_json(const CvReport& report);
CvReport cv_report_from_json(const nlohmann::json& j);

// A sweep grid is {"base": {...config...}, "axes": {"selection.n": [10, 30], ...},
// "preset": "expression_subsets", "folds": 5, "seed": 7, "features": "f.csv"}.
// Every key but "axes" is optional. Axes expand as a cartesian product in key
// order with the last key varying fastest.
struct SweepPoint {
  PipelineConfig config;
  nlohmann::json overrides;  // the axis values that produced this point
};

std::vector<SweepPoint> expand_sweep_grid(const nlohmann::json& grid);

struct LeaderboardRow {
  std::uint64_t config_hash = 0;
  nlohmann::json overrides;
  std::size_t features = 0;
  std::map<std::string, double> metrics;  // pooled CV metrics
};

// AUROC descending, then config hash ascending.
void sort_leaderboard(std::vector<LeaderboardRow>& rows);
std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows);

std::string hash_hex(std::uint64_t hash);

}  // namespace hyposcreen
