#include "hyposcreen/config.hpp"

#include <algorithm>

#include "hyposcreen/csv.hpp"
#include "hyposcreen/error.hpp"

namespace hyposcreen {

using nlohmann::json;

std::vector<BoostParams> default_candidate_grid() {
  std::vector<BoostParams> grid;
  for (double lr : {0.05, 0.1, 0.2})
    for (std::size_t leaves : {7, 15, 31})
      for (std::size_t min_leaf : {10, 20}) {
        BoostParams p;
        p.learning_rate = lr;
        p.max_leaves = leaves;
        p.min_samples_leaf = min_leaf;
        grid.push_back(p);
      }
  return grid;
}

void validate(const PipelineConfig& c) {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::DegenerateParams, what); };
  if (c.expressions.empty()) bad("expressions must be nonempty");
  if (c.selection.n < 1) bad("selection.n must be >= 1");
  if (c.selection.inner_folds < 2) bad("selection.inner_folds must be >= 2");
  if (c.selection.l2_strength < 0.0) bad("selection.l2_strength must be >= 0");
  if (c.smote.k_neighbors < 1) bad("smote.k_neighbors must be >= 1");
  if (c.ensemble.grid.empty()) bad("ensemble.grid must be nonempty");
  if (c.ensemble.m < 1) bad("ensemble.m must be >= 1");
  if (c.ensemble.m > c.ensemble.grid.size())
    throw Error(ErrorCode::MTooLarge, "ensemble.m exceeds the candidate grid size");
  if (c.ensemble.inner_folds < 2) bad("ensemble.inner_folds must be >= 2");
  if (c.ensemble.meta_l2 < 0.0) bad("ensemble.meta_l2 must be >= 0");
  if (c.folds < 2) bad("folds must be >= 2");
  if (c.bootstrap_seeds < 1) bad("bootstrap_seeds must be >= 1");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) bad("threshold must lie in [0, 1]");
  if (c.entropy_bins < 2) bad("entropy_bins must be >= 2");
  if (!(c.min_confidence >= 0.0 && c.min_confidence <= 1.0)) bad("min_confidence must lie in [0, 1]");
}

json to_json(const PipelineConfig& c) {
  json expressions = json::array();
  for (auto e : c.expressions) expressions.push_back(to_string(e));
  json grid = json::array();
  for (const auto& p : c.ensemble.grid) grid.push_back(to_json(p));
  return json{
      {"expressions", expressions},
      {"scaler", to_string(c.scaler)},
      {"selection",
       {{"method", to_string(c.selection.method)},
        {"n", c.selection.n},
        {"l2_strength", c.selection.l2_strength},
        {"inner_folds", c.selection.inner_folds},
        {"improvement_eps", c.selection.improvement_eps},
        {"booster", to_json(c.selection.booster)}}},
      {"smote", {{"enabled", c.smote.enabled}, {"k_neighbors", c.smote.k_neighbors}}},
      {"ensemble",
       {{"grid", grid}, {"m", c.ensemble.m}, {"inner_folds", c.ensemble.inner_folds}, {"meta_l2", c.ensemble.meta_l2}}},
      {"folds", c.folds},
      {"bootstrap_seeds", c.bootstrap_seeds},
      {"seed", c.seed},
      {"threshold", c.threshold},
      {"entropy_bins", c.entropy_bins},
      {"landmark_map", c.landmark_map},
      {"min_confidence", c.min_confidence}};
}

namespace {

[[noreturn]] void schema(const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); }

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) schema("'" + where + "' must be an object");
}

template <typename T>
T number(const json& j, const std::string& key) {
  if (!j.is_number()) schema("field '" + key + "' must be numeric");
  if constexpr (std::is_unsigned_v<T>) {
    if (!is_nonnegative_integer(j)) schema("field '" + key + "' must be a nonnegative integer");
  }
  return j.get<T>();
}

std::string text(const json& j, const std::string& key) {
  if (!j.is_string()) schema("field '" + key + "' must be a string");
  return j.get<std::string>();
}

void read_selection(const json& j, SelectionConfig& s) {
  require_object(j, "selection");
  for (const auto& [key, value] : j.items()) {
    if (key == "method") {
      const auto m = parse_selection_method(text(value, key));
      if (!m) schema("unknown selection method '" + value.get<std::string>() + "'");
      s.method = *m;
    } else if (key == "n") s.n = number<std::size_t>(value, key);
    else if (key == "l2_strength") s.l2_strength = number<double>(value, key);
    else if (key == "inner_folds") s.inner_folds = number<std::size_t>(value, key);
    else if (key == "improvement_eps") s.improvement_eps = number<double>(value, key);
    else if (key == "booster") s.booster = boost_params_from_json(value);
    else schema("unknown field 'selection." + key + "'");
  }
}

void read_ensemble(const json& j, EnsembleConfig& e) {
  require_object(j, "ensemble");
  for (const auto& [key, value] : j.items()) {
    if (key == "grid") {
      if (!value.is_array()) schema("'ensemble.grid' must be an array");
      e.grid.clear();
      for (const auto& p : value) e.grid.push_back(boost_params_from_json(p));
    } else if (key == "m") e.m = number<std::size_t>(value, key);
    else if (key == "inner_folds") e.inner_folds = number<std::size_t>(value, key);
    else if (key == "meta_l2") e.meta_l2 = number<double>(value, key);
    else schema("unknown field 'ensemble." + key + "'");
  }
}

}  // namespace

PipelineConfig config_from_json(const json& j) {
  require_object(j, "config");
  PipelineConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "expressions") {
      if (!value.is_array()) schema("'expressions' must be an array");
      c.expressions.clear();
      for (const auto& e : value) {
        const auto parsed = parse_expression(text(e, key));
        if (!parsed) schema("unknown expression '" + e.get<std::string>() + "'");
        if (std::find(c.expressions.begin(), c.expressions.end(), *parsed) == c.expressions.end())
          c.expressions.push_back(*parsed);
      }
      std::sort(c.expressions.begin(), c.expressions.end());
    } else if (key == "scaler") {
      const auto s = parse_scaler_kind(text(value, key));
      if (!s) schema("unknown scaler '" + value.get<std::string>() + "'");
      c.scaler = *s;
    } else if (key == "selection") read_selection(value, c.selection);
    else if (key == "smote") {
      require_object(value, "smote");
      for (const auto& [k2, v2] : value.items()) {
        if (k2 == "enabled") {
          if (!v2.is_boolean()) schema("field 'smote.enabled' must be a boolean");
          c.smote.enabled = v2.get<bool>();
        } else if (k2 == "k_neighbors") c.smote.k_neighbors = number<std::size_t>(v2, k2);
        else schema("unknown field 'smote." + k2 + "'");
      }
    } else if (key == "ensemble") read_ensemble(value, c.ensemble);
    else if (key == "folds") c.folds = number<std::size_t>(value, key);
    else if (key == "bootstrap_seeds") c.bootstrap_seeds = number<std::size_t>(value, key);
    else if (key == "seed") c.seed = number<std::uint64_t>(value, key);
    else if (key == "threshold") c.threshold = number<double>(value, key);
    else if (key == "entropy_bins") c.entropy_bins = number<std::size_t>(value, key);
    else if (key == "landmark_map") c.landmark_map = text(value, key);
    else if (key == "min_confidence") c.min_confidence = number<double>(value, key);
    else schema("unknown config field '" + key + "'");
  }
  validate(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  const auto text = csv::read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

bool is_nonnegative_integer(const json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const PipelineConfig& config) { return fnv1a(to_json(config).dump()); }

}  // namespace hyposcreen
