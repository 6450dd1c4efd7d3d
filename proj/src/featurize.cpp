#include "hyposcreen/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "hyposcreen/error.hpp"
#include "hyposcreen/parallel.hpp"

namespace hyposcreen {

using nlohmann::json;

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::RightEyeOpen: return "right_eye_open";
    case Attribute::LeftEyeOpen: return "left_eye_open";
    case Attribute::RightBrowRaised: return "right_brow_raised";
    case Attribute::LeftBrowRaised: return "left_brow_raised";
    case Attribute::MouthOpen: return "mouth_open";
    case Attribute::MouthWidth: return "mouth_width";
    case Attribute::JawOpen: return "jaw_open";
  }
  return "";
}

double shannon_entropy(std::span<const double> values, EntropyDomain domain, std::size_t bins) {
  if (values.empty()) throw Error(ErrorCode::EmptySeries, "entropy of an empty series");
  if (bins < 2) throw Error(ErrorCode::DegenerateParams, "entropy needs at least 2 bins");

  double lo = domain.lo;
  double hi = domain.hi;
  if (domain.kind == EntropyDomain::Kind::Fixed) {
    if (!(lo < hi)) throw Error(ErrorCode::DegenerateDomain, "fixed entropy domain needs lo < hi");
  } else {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
    if (lo == hi) return 0.0;
  }

  std::vector<std::size_t> counts(bins, 0);
  const double width = hi - lo;
  for (double v : values) {
    const double scaled = std::floor((v - lo) / width * static_cast<double>(bins));
    const auto bin = static_cast<std::size_t>(std::clamp(scaled, 0.0, static_cast<double>(bins - 1)));
    ++counts[bin];
  }
  const double n = static_cast<double>(values.size());
  double entropy = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    entropy -= p * std::log(p);
  }
  return std::max(entropy, 0.0);
}

namespace {

StatTriple describe(std::span<const double> values, EntropyDomain domain, std::size_t bins) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double variance = 0.0;
  for (double v : values) variance += (v - mean) * (v - mean);
  variance /= n;
  return {mean, variance, shannon_entropy(values, domain, bins), false};
}

}  // namespace

StatTriple au_statistics(std::span<const double> intensity, std::span<const int> activation,
                         const EntropySettings& settings) {
  if (intensity.size() != activation.size())
    throw Error(ErrorCode::LengthMismatch, "intensity and activation lengths differ");
  if (intensity.empty()) throw Error(ErrorCode::EmptySeries, "AU series is empty");
  std::vector<double> active;
  for (std::size_t i = 0; i < intensity.size(); ++i)
    if (activation[i] == 1) active.push_back(intensity[i]);
  if (active.empty()) return {0.0, 0.0, 0.0, true};
  return describe(active, settings.au_domain, settings.bins);
}

StatTriple aggregate_attribute_series(std::span<const double> values,
                                      const EntropySettings& settings) {
  if (values.empty()) throw Error(ErrorCode::EmptySeries, "attribute series is empty");
  return describe(values, settings.attribute_domain, settings.bins);
}

LandmarkIndexMap LandmarkIndexMap::defaults() {
  LandmarkIndexMap map;
  auto set = [&](Attribute a, LandmarkGroup first, LandmarkGroup second) {
    map.endpoints[static_cast<std::size_t>(a)] = {std::move(first), std::move(second)};
  };
  set(Attribute::RightEyeOpen, {159}, {145});
  set(Attribute::LeftEyeOpen, {386}, {374});
  set(Attribute::RightBrowRaised, {70, 63, 105, 66, 107}, {33, 133});
  set(Attribute::LeftBrowRaised, {300, 293, 334, 296, 336}, {362, 263});
  set(Attribute::MouthOpen, {13}, {14});
  set(Attribute::MouthWidth, {61}, {291});
  set(Attribute::JawOpen, {2}, {152});
  map.right_iris = {468};
  map.left_iris = {473};
  return map;
}

namespace {

LandmarkGroup parse_group(const json& node, std::string_view key) {
  LandmarkGroup group;
  if (node.is_number_unsigned()) {
    group.push_back(node.get<std::size_t>());
  } else if (node.is_array() && !node.empty()) {
    for (const auto& v : node) {
      if (!v.is_number_unsigned())
        throw Error(ErrorCode::SchemaViolation, "field '" + std::string(key) + "' in landmark map");
      group.push_back(v.get<std::size_t>());
    }
  } else {
    throw Error(ErrorCode::SchemaViolation, "field '" + std::string(key) + "' in landmark map");
  }
  return group;
}

json group_json(const LandmarkGroup& g) {
  if (g.size() == 1) return g.front();
  return json(g);
}

}  // namespace

LandmarkIndexMap LandmarkIndexMap::parse_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("malformed landmark map: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "landmark map must be an object");
  LandmarkIndexMap map = defaults();
  for (auto a : kAllAttributes) {
    const std::string key(to_string(a));
    if (!doc.contains(key)) continue;
    const auto& node = doc[key];
    if (!node.is_array() || node.size() != 2)
      throw Error(ErrorCode::SchemaViolation, "field '" + key + "' needs two endpoints");
    map.endpoints[static_cast<std::size_t>(a)] = {parse_group(node[0], key), parse_group(node[1], key)};
  }
  if (doc.contains("right_iris")) map.right_iris = parse_group(doc["right_iris"], "right_iris");
  if (doc.contains("left_iris")) map.left_iris = parse_group(doc["left_iris"], "left_iris");
  return map;
}

LandmarkIndexMap LandmarkIndexMap::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_json(buffer.str());
}

std::string LandmarkIndexMap::to_json() const {
  json doc = json::object();
  for (auto a : kAllAttributes) {
    const auto& ends = endpoints[static_cast<std::size_t>(a)];
    doc[std::string(to_string(a))] = json::array({group_json(ends[0]), group_json(ends[1])});
  }
  doc["right_iris"] = group_json(right_iris);
  doc["left_iris"] = group_json(left_iris);
  return doc.dump(2);
}

namespace {

struct Planar {
  double x;
  double y;
};

Planar centroid(std::span<const Point3> frame, const LandmarkGroup& group) {
  Planar c{0.0, 0.0};
  for (std::size_t idx : group) {
    if (idx >= frame.size())
      throw Error(ErrorCode::IndexOutOfRange,
                  "landmark " + std::to_string(idx) + " of " + std::to_string(frame.size()));
    c.x += frame[idx].x;
    c.y += frame[idx].y;
  }
  c.x /= static_cast<double>(group.size());
  c.y /= static_cast<double>(group.size());
  return c;
}

double planar_distance(Planar a, Planar b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

std::array<double, kAttributeCount> geometric_attributes(std::span<const Point3> frame,
                                                         const LandmarkIndexMap& map) {
  const double iris = planar_distance(centroid(frame, map.right_iris), centroid(frame, map.left_iris));
  if (iris < 1e-9) throw Error(ErrorCode::DegenerateIrisDistance, "iris centres coincide");
  std::array<double, kAttributeCount> out{};
  for (std::size_t a = 0; a < kAttributeCount; ++a) {
    const auto& ends = map.endpoints[a];
    out[a] = planar_distance(centroid(frame, ends[0]), centroid(frame, ends[1])) / iris;
  }
  return out;
}

std::array<std::vector<double>, kAttributeCount> attribute_series(const RecordingSeries& series,
                                                                  const LandmarkIndexMap& map) {
  std::array<std::vector<double>, kAttributeCount> out;
  for (auto& s : out) s.reserve(series.frame_count);
  for (std::size_t f = 0; f < series.frame_count; ++f) {
    const auto values =
        geometric_attributes(std::span(series.landmark_frame(f), kLandmarkCount), map);
    for (std::size_t a = 0; a < kAttributeCount; ++a) out[a].push_back(values[a]);
  }
  return out;
}

ExpressionStatistics compute_expression_statistics(const RecordingSeries& series,
                                                   const LandmarkIndexMap& map,
                                                   const EntropySettings& settings) {
  ExpressionStatistics stats;
  for (const auto& [name, intensity] : series.au_intensity) {
    const auto act = series.au_activation.find(name);
    if (act == series.au_activation.end())
      throw Error(ErrorCode::IncompleteExpression, name + " activation missing");
    stats.au[name] = au_statistics(intensity, act->second, settings);
  }
  if (series.has_landmarks()) {
    const auto attrs = attribute_series(series, map);
    for (std::size_t a = 0; a < kAttributeCount; ++a)
      stats.attributes[a] = aggregate_attribute_series(attrs[a], settings);
  }
  return stats;
}

namespace {

constexpr std::array<std::string_view, 3> kStatNames{"mean", "variance", "entropy"};

}  // namespace

std::vector<std::string> feature_names(const std::set<Expression>& mask) {
  std::vector<std::string> names;
  for (auto e : kAllExpressions) {
    if (!mask.contains(e)) continue;
    const std::string prefix(to_string(e));
    for (int au : expression_aus(e))
      for (auto stat : kStatNames) names.push_back(prefix + "_au_" + au_name(au) + "_" + std::string(stat));
    for (auto a : kAllAttributes)
      for (auto stat : kStatNames)
        names.push_back(prefix + "_lm_" + std::string(to_string(a)) + "_" + std::string(stat));
  }
  return names;
}

FeatureVector assemble_feature_vector(std::string participant_id,
                                      const std::map<Expression, ExpressionStatistics>& stats,
                                      const std::set<Expression>& mask) {
  FeatureVector vec;
  vec.participant_id = std::move(participant_id);
  vec.expression_mask = mask;
  auto push = [&](const std::string& stem, const StatTriple& t) {
    const double values[3] = {t.mean, t.variance, t.entropy};
    for (std::size_t s = 0; s < 3; ++s) {
      vec.names.push_back(stem + "_" + std::string(kStatNames[s]));
      vec.values.push_back(values[s]);
      if (t.missing) vec.missing.insert(vec.names.back());
    }
  };
  for (auto e : kAllExpressions) {
    if (!mask.contains(e)) continue;
    const std::string expr(to_string(e));
    const auto it = stats.find(e);
    if (it == stats.end()) throw Error(ErrorCode::IncompleteExpression, expr + ": no statistics");
    for (int au : expression_aus(e)) {
      const auto name = au_name(au);
      const auto found = it->second.au.find(name);
      if (found == it->second.au.end()) throw Error(ErrorCode::IncompleteExpression, expr + ": " + name);
      push(expr + "_au_" + name, found->second);
    }
    for (auto a : kAllAttributes) {
      const auto& triple = it->second.attributes[static_cast<std::size_t>(a)];
      if (!triple) throw Error(ErrorCode::IncompleteExpression, expr + ": " + std::string(to_string(a)));
      push(expr + "_lm_" + std::string(to_string(a)), *triple);
    }
  }
  return vec;
}

FeaturizeResult featurize_manifest(const Manifest& manifest, const FeaturizeOptions& options) {
  if (options.expressions.empty())
    throw Error(ErrorCode::DegenerateParams, "expression mask is empty");

  // Participant -> entry index per expression.
  std::map<std::string, std::map<Expression, std::size_t>> by_participant;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    if (options.expressions.contains(entry.expression))
      by_participant[entry.participant_id][entry.expression] = i;
  }

  std::vector<std::size_t> work;
  for (const auto& [pid, exprs] : by_participant) {
    for (auto e : options.expressions)
      if (!exprs.contains(e))
        throw Error(ErrorCode::IncompleteExpression, pid + ": no " + std::string(to_string(e)) + " recording");
    for (const auto& [e, idx] : exprs) work.push_back(idx);
  }

  std::vector<ExpressionStatistics> computed(manifest.entries.size());
  parallel_for(work.size(), [&](std::size_t w) {
    const auto& entry = manifest.entries[work[w]];
    auto series = merge_series(parse_au_csv(entry.au_path, entry.expression),
                               parse_landmark_series(entry.landmark_path));
    series.participant_id = entry.participant_id;
    if (options.min_confidence) series = filter_low_confidence(series, *options.min_confidence);
    computed[work[w]] = compute_expression_statistics(series, options.index_map, options.entropy);
  });

  FeaturizeResult result;
  result.dataset.feature_names = feature_names(options.expressions);
  result.dataset.features = Matrix(0, result.dataset.feature_names.size());
  for (const auto& [pid, exprs] : by_participant) {
    std::map<Expression, ExpressionStatistics> stats;
    for (const auto& [e, idx] : exprs) stats[e] = computed[idx];
    auto vec = assemble_feature_vector(pid, stats, options.expressions);

    const auto& first = manifest.entries[exprs.begin()->second];
    for (const auto& [e, idx] : exprs)
      if (manifest.entries[idx].label != first.label)
        throw Error(ErrorCode::SchemaViolation, "field 'label' disagrees across " + pid + " recordings");
    Demographics demo;
    demo.cohort = std::string(to_string(first.cohort));
    if (first.sex) demo.sex = std::string(to_string(*first.sex));
    demo.age = first.age;
    demo.ethnicity = first.ethnicity;
    demo.disease_duration = first.disease_duration;

    result.dataset.features.append_row(vec.values);
    result.dataset.labels.push_back(first.label == Diagnosis::Pd ? 1 : 0);
    result.dataset.participant_ids.push_back(pid);
    result.dataset.demographics.push_back(std::move(demo));
    result.vectors.push_back(std::move(vec));
  }
  return result;
}

}  // namespace hyposcreen
