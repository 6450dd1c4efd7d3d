#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hyposcreen {

enum class Expression { Smile, Disgust, Surprise };
enum class Diagnosis { Pd, NonPd };
enum class Cohort { HomeGlobal, Clinic, PdCare, HomeBd };
enum class Sex { Male, Female, Other };

inline constexpr std::array<Expression, 3> kAllExpressions{Expression::Smile, Expression::Disgust,
                                                           Expression::Surprise};
inline constexpr std::size_t kLandmarkCount = 478;
inline constexpr std::size_t kAusPerExpression = 7;

std::string_view to_string(Expression e);
std::string_view to_string(Diagnosis d);
std::string_view to_string(Cohort c);
std::string_view to_string(Sex s);
std::optional<Expression> parse_expression(std::string_view text);
std::optional<Diagnosis> parse_diagnosis(std::string_view text);
std::optional<Cohort> parse_cohort(std::string_view text);
std::optional<Sex> parse_sex(std::string_view text);

// Action units tracked for each expression task, ascending by AU number.
const std::array<int, kAusPerExpression>& expression_aus(Expression e);

// "AU06" style zero-padded name.
std::string au_name(int au);

struct ManifestEntry {
  std::string participant_id;
  Expression expression = Expression::Smile;
  std::filesystem::path au_path;
  std::filesystem::path landmark_path;
  Diagnosis label = Diagnosis::NonPd;
  Cohort cohort = Cohort::HomeGlobal;
  std::optional<Sex> sex;
  std::optional<double> age;
  std::optional<std::string> ethnicity;
  std::optional<double> disease_duration;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

// Relative paths in the manifest resolve against the manifest's directory.
Manifest parse_manifest(const std::filesystem::path& path);

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point3&, const Point3&) = default;
};

struct RecordingSeries {
  std::string participant_id;
  Expression expression = Expression::Smile;
  std::size_t frame_count = 0;
  std::vector<long> frame_index;
  std::map<std::string, std::vector<double>> au_intensity;  // keyed by "AU06"
  std::map<std::string, std::vector<int>> au_activation;
  // frame_count * kLandmarkCount points, frame-major. Empty when absent.
  std::vector<Point3> landmarks;
  std::optional<std::vector<double>> confidence;

  bool has_landmarks() const { return !landmarks.empty(); }
  const Point3* landmark_frame(std::size_t frame) const {
    return landmarks.data() + frame * kLandmarkCount;
  }

  friend bool operator==(const RecordingSeries&, const RecordingSeries&) = default;
};

// Reads an OpenFace-style AU table. Only the expression's seven AUs are kept.
RecordingSeries parse_au_csv(const std::filesystem::path& path, Expression expression);
RecordingSeries parse_au_csv_text(std::string_view text, Expression expression);

// Reads a `frame,p000_x,...,p477_z` landmark table.
RecordingSeries parse_landmark_series(const std::filesystem::path& path);
RecordingSeries parse_landmark_text(std::string_view text);

// Canonical writers; parse(write(s)) reproduces s.
std::string write_au_csv(const RecordingSeries& series);
std::string write_landmark_csv(const RecordingSeries& series);

// Combines the AU and landmark halves of one recording. Frame counts must agree.
RecordingSeries merge_series(RecordingSeries au_part, RecordingSeries landmark_part);

// Drops frames whose confidence is below threshold. No-op without confidence.
RecordingSeries filter_low_confidence(const RecordingSeries& series, double threshold);

inline constexpr double kLowConfidence = 0.75;

struct ValidationReport {
  std::size_t frame_count = 0;
  std::map<std::string, double> active_fraction;
  std::vector<std::string> never_active;  // AUs with zero active frames
  bool confidence_available = false;
  double confidence_mean = 0.0;
  double confidence_min = 0.0;
  std::size_t low_confidence_frames = 0;
};

ValidationReport validate_recording(const RecordingSeries& series);

}  // namespace hyposcreen
