#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyposcreen/dataset.hpp"
#include "hyposcreen/ingest.hpp"

namespace hyposcreen {

enum class Attribute {
  RightEyeOpen,
  LeftEyeOpen,
  RightBrowRaised,
  LeftBrowRaised,
  MouthOpen,
  MouthWidth,
  JawOpen,
};

inline constexpr std::size_t kAttributeCount = 7;
inline constexpr std::array<Attribute, kAttributeCount> kAllAttributes{
    Attribute::RightEyeOpen,   Attribute::LeftEyeOpen, Attribute::RightBrowRaised,
    Attribute::LeftBrowRaised, Attribute::MouthOpen,   Attribute::MouthWidth,
    Attribute::JawOpen};

std::string_view to_string(Attribute a);

// 7 AUs x 3 stats + 7 attributes x 3 stats.
inline constexpr std::size_t kFeaturesPerExpression = 42;

struct EntropyDomain {
  enum class Kind { Fixed, Observed };
  Kind kind = Kind::Observed;
  double lo = 0.0;
  double hi = 0.0;

  static EntropyDomain fixed(double lo, double hi) { return {Kind::Fixed, lo, hi}; }
  static EntropyDomain observed() { return {Kind::Observed, 0.0, 0.0}; }
};

struct EntropySettings {
  std::size_t bins = 10;
  EntropyDomain au_domain = EntropyDomain::fixed(0.0, 5.0);
  EntropyDomain attribute_domain = EntropyDomain::observed();
};

// Shannon entropy (nats) of the equal-width histogram of values over the domain.
// Values outside a fixed domain fall into the edge bins. A constant series in
// observed mode has entropy 0.
double shannon_entropy(std::span<const double> values, EntropyDomain domain, std::size_t bins);

struct StatTriple {
  double mean = 0.0;
  double variance = 0.0;
  double entropy = 0.0;
  bool missing = false;  // no active frames; the triple is the 0.0 sentinel
};

// Statistics over frames where the AU is active. Population variance.
StatTriple au_statistics(std::span<const double> intensity, std::span<const int> activation,
                         const EntropySettings& settings = {});

StatTriple aggregate_attribute_series(std::span<const double> values,
                                      const EntropySettings& settings = {});

// A landmark reference is the centroid of one or more mesh points.
using LandmarkGroup = std::vector<std::size_t>;

struct LandmarkIndexMap {
  std::array<std::array<LandmarkGroup, 2>, kAttributeCount> endpoints;
  LandmarkGroup right_iris;
  LandmarkGroup left_iris;

  // Default assignment for the 478-point face mesh with refined irises.
  static LandmarkIndexMap defaults();
  static LandmarkIndexMap parse_json(std::string_view text);
  static LandmarkIndexMap load(const std::filesystem::path& path);
  std::string to_json() const;
};

// Planar (x, y) endpoint distance divided by the inter-iris distance.
std::array<double, kAttributeCount> geometric_attributes(std::span<const Point3> frame,
                                                         const LandmarkIndexMap& map);

// Per-frame attribute values, one series per attribute.
std::array<std::vector<double>, kAttributeCount> attribute_series(const RecordingSeries& series,
                                                                  const LandmarkIndexMap& map);

struct ExpressionStatistics {
  std::map<std::string, StatTriple> au;  // keyed by "AU06"
  std::array<std::optional<StatTriple>, kAttributeCount> attributes;
};

ExpressionStatistics compute_expression_statistics(const RecordingSeries& series,
                                                   const LandmarkIndexMap& map,
                                                   const EntropySettings& settings = {});

struct FeatureVector {
  std::string participant_id;
  std::vector<std::string> names;
  std::vector<double> values;
  std::set<std::string> missing;  // features holding the zero-activation sentinel
  std::set<Expression> expression_mask;
};

// Canonical feature names for a mask: expressions in smile, disgust, surprise
// order; AUs ascending then attributes; stats mean, variance, entropy.
std::vector<std::string> feature_names(const std::set<Expression>& mask);

FeatureVector assemble_feature_vector(std::string participant_id,
                                      const std::map<Expression, ExpressionStatistics>& stats,
                                      const std::set<Expression>& mask);

struct FeaturizeOptions {
  std::set<Expression> expressions{Expression::Smile, Expression::Disgust, Expression::Surprise};
  LandmarkIndexMap index_map = LandmarkIndexMap::defaults();
  EntropySettings entropy;
  std::optional<double> min_confidence;
};

struct FeaturizeResult {
  LabeledDataset dataset;
  std::vector<FeatureVector> vectors;
};

// Parses every recording referenced by the manifest and builds one feature
// row per participant, sorted by participant id.
FeaturizeResult featurize_manifest(const Manifest& manifest, const FeaturizeOptions& options);

}  // namespace hyposcreen
