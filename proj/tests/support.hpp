#pragma once

// Hand-rolled generators and fixtures shared by the test suites.

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyposcreen/csv.hpp"
#include "hyposcreen/dataset.hpp"
#include "hyposcreen/ingest.hpp"
#include "hyposcreen/matrix.hpp"
#include "hyposcreen/rng.hpp"

namespace hyposcreen::testing {

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = lo + (hi - lo) * rng.uniform();
  return m;
}

inline Matrix gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = rng.normal();
  return m;
}

// Random 0/1 labels with both classes present.
inline std::vector<int> random_labels(Rng& rng, std::size_t n, double p_positive = 0.5) {
  std::vector<int> y(n);
  for (auto& v : y) v = rng.uniform() < p_positive ? 1 : 0;
  y[0] = 1;
  y[n > 1 ? 1 : 0] = 0;
  return y;
}

// Rows of a two-Gaussian problem: label 1 rows are shifted by delta on the
// first `informative` columns.
struct Labeled {
  Matrix x;
  std::vector<int> y;
};

inline Labeled shifted_gaussians(Rng& rng, std::size_t n, std::size_t d, std::size_t informative, double delta) {
  Labeled out{Matrix(n, d), std::vector<int>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    out.y[r] = static_cast<int>(r % 2);
    for (std::size_t c = 0; c < d; ++c)
      out.x(r, c) = rng.normal() + (out.y[r] == 1 && c < informative ? delta : 0.0);
  }
  return out;
}

inline std::vector<std::string> column_names(std::size_t d, const std::string& prefix = "f") {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < d; ++c) names.push_back(prefix + std::to_string(c));
  return names;
}

// Directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hyposcreen_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// A plausible face mesh: every point jittered around the unit square, with
// the irises pinned apart so normalization is well defined.
inline std::vector<Point3> random_face(Rng& rng) {
  std::vector<Point3> face(kLandmarkCount);
  for (auto& p : face) p = {0.2 + 0.6 * rng.uniform(), 0.2 + 0.6 * rng.uniform(), 0.1 * rng.normal()};
  face[468] = {0.40 + 0.01 * rng.normal(), 0.40, 0.0};
  face[473] = {0.60 + 0.01 * rng.normal(), 0.40, 0.0};
  return face;
}

// One recording of `frames` frames. Positives get damped AU intensities and
// a narrower mouth so a classifier has something to find.
inline RecordingSeries random_recording(Rng& rng, const std::string& id, Expression e, std::size_t frames,
                                        bool positive) {
  RecordingSeries s;
  s.participant_id = id;
  s.expression = e;
  s.frame_count = frames;
  for (std::size_t f = 0; f < frames; ++f) s.frame_index.push_back(static_cast<long>(f));
  const double scale = positive ? 0.6 : 1.0;
  for (int au : expression_aus(e)) {
    auto& intensity = s.au_intensity[au_name(au)];
    auto& active = s.au_activation[au_name(au)];
    for (std::size_t f = 0; f < frames; ++f) {
      const double v = std::min(5.0, std::max(0.0, scale * (2.5 + 1.5 * rng.normal())));
      intensity.push_back(std::round(v * 100.0) / 100.0);
      active.push_back(v > 1.0 ? 1 : 0);
    }
  }
  for (std::size_t f = 0; f < frames; ++f) {
    auto face = random_face(rng);
    face[61].x = 0.5 - (positive ? 0.08 : 0.12);
    face[291].x = 0.5 + (positive ? 0.08 : 0.12);
    s.landmarks.insert(s.landmarks.end(), face.begin(), face.end());
  }
  return s;
}

// Writes AU and landmark CSVs for every participant x expression plus a
// manifest. Returns the manifest path.
inline std::filesystem::path write_cohort(const std::filesystem::path& dir, std::size_t participants,
                                          std::uint64_t seed, std::size_t frames = 8,
                                          const std::vector<Expression>& expressions = {
                                              Expression::Smile, Expression::Disgust, Expression::Surprise}) {
  Rng rng(seed);
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t p = 0; p < participants; ++p) {
    const std::string id = "P" + std::to_string(1000 + p);
    const bool positive = p % 3 == 0;
    for (auto e : expressions) {
      const auto series = random_recording(rng, id, e, frames, positive);
      const std::string stem = id + "_" + std::string(to_string(e));
      csv::write_text(dir / (stem + "_au.csv"), write_au_csv(series));
      csv::write_text(dir / (stem + "_lm.csv"), write_landmark_csv(series));
      entries.push_back({{"participant_id", id},
                         {"expression", to_string(e)},
                         {"au_path", stem + "_au.csv"},
                         {"landmark_path", stem + "_lm.csv"},
                         {"label", positive ? "pd" : "non_pd"},
                         {"cohort", p % 2 == 0 ? "clinic" : "home_global"},
                         {"sex", p % 2 == 0 ? "female" : "male"},
                         {"age", 40 + static_cast<int>(p % 40)},
                         {"ethnicity", nullptr},
                         {"disease_duration", positive ? nlohmann::json(3.5) : nlohmann::json(nullptr)}});
    }
  }
  const auto path = dir / "manifest.json";
  csv::write_text(path, nlohmann::json{{"entries", entries}}.dump(2));
  return path;
}

}  // namespace hyposcreen::testing
