#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <sstream>

#include "hyposcreen/csv.hpp"
#include "hyposcreen/error.hpp"
#include "hyposcreen/ingest.hpp"
#include "support.hpp"

using namespace hyposcreen;
using hyposcreen::testing::TempDir;
namespace ht = hyposcreen::testing;

namespace {

// Header plus one row per frame for the smile AU set.
std::string smile_csv(const std::vector<std::string>& rows, const std::string& extra_header = "") {
  std::string text = "frame";
  for (int au : expression_aus(Expression::Smile)) text += "," + au_name(au) + "_r";
  for (int au : expression_aus(Expression::Smile)) text += "," + au_name(au) + "_c";
  text += extra_header + "\n";
  for (const auto& r : rows) text += r + "\n";
  return text;
}

// Frame number, seven intensities, seven activations.
std::string smile_row(long frame, double intensity, int active) {
  std::string row = std::to_string(frame);
  for (int i = 0; i < 7; ++i) row += "," + csv::format_double(intensity);
  for (int i = 0; i < 7; ++i) row += "," + std::to_string(active);
  return row;
}

std::string landmark_header(std::size_t points) {
  std::string h = "frame";
  for (std::size_t p = 0; p < points; ++p) {
    char name[8];
    std::snprintf(name, sizeof name, "p%03zu", p);
    h += std::string(",") + name + "_x," + name + "_y," + name + "_z";
  }
  return h;
}

std::string landmark_row(long frame, std::size_t points, double v) {
  std::string row = std::to_string(frame);
  for (std::size_t i = 0; i < 3 * points; ++i) row += "," + csv::format_double(v);
  return row;
}

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << error_code_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

nlohmann::json entry(const std::string& id, const std::string& expression) {
  return {{"participant_id", id}, {"expression", expression}, {"au_path", "a.csv"}, {"landmark_path", "l.csv"},
          {"label", "pd"},        {"cohort", "clinic"},       {"sex", "female"},    {"age", 61},
          {"ethnicity", "white"}, {"disease_duration", 4.0}};
}

std::filesystem::path write_manifest(const TempDir& dir, const nlohmann::json& entries) {
  csv::write_text(dir / "a.csv", "x");
  csv::write_text(dir / "l.csv", "x");
  const auto path = dir / "manifest.json";
  // A braced single entry arrives as the object itself.
  const auto list = entries.is_array() ? entries : nlohmann::json::array({entries});
  csv::write_text(path, nlohmann::json{{"entries", list}}.dump());
  return path;
}

}  // namespace

TEST(Manifest, TwoEntriesParse) {
  TempDir dir;
  const auto m = parse_manifest(write_manifest(dir, {entry("P1", "smile"), entry("P1", "disgust")}));
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].participant_id, "P1");
  EXPECT_EQ(m.entries[1].expression, Expression::Disgust);
  EXPECT_EQ(m.entries[0].label, Diagnosis::Pd);
  EXPECT_EQ(m.entries[0].cohort, Cohort::Clinic);
  EXPECT_EQ(m.entries[0].sex, Sex::Female);
  EXPECT_DOUBLE_EQ(*m.entries[0].age, 61.0);
  EXPECT_EQ(m.entries[0].au_path, dir / "a.csv");
}

TEST(Manifest, DuplicateParticipantExpressionRejected) {
  TempDir dir;
  expect_code(ErrorCode::DuplicateEntry,
              [&] { parse_manifest(write_manifest(dir, {entry("P1", "smile"), entry("P1", "smile")})); });
}

TEST(Manifest, NegativeAgeRejected) {
  TempDir dir;
  auto e = entry("P1", "smile");
  e["age"] = -3;
  try {
    parse_manifest(write_manifest(dir, {e}));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::SchemaViolation);
    EXPECT_NE(std::string(err.what()).find("age"), std::string::npos);
  }
}

TEST(Manifest, OptionalFieldsMayBeNull) {
  TempDir dir;
  auto e = entry("P1", "smile");
  e["sex"] = nullptr;
  e["age"] = nullptr;
  e.erase("ethnicity");
  const auto m = parse_manifest(write_manifest(dir, {e}));
  EXPECT_FALSE(m.entries[0].sex);
  EXPECT_FALSE(m.entries[0].age);
  EXPECT_FALSE(m.entries[0].ethnicity);
}

TEST(Manifest, MissingReferencedFileAndBadEnums) {
  TempDir dir;
  auto e = entry("P1", "smile");
  e["au_path"] = "nope.csv";
  expect_code(ErrorCode::MissingFile, [&] { parse_manifest(write_manifest(dir, {e})); });
  auto bad = entry("P1", "frown");
  expect_code(ErrorCode::SchemaViolation, [&] { parse_manifest(write_manifest(dir, {bad})); });
  auto dur = entry("P1", "smile");
  dur["disease_duration"] = -1.0;
  expect_code(ErrorCode::SchemaViolation, [&] { parse_manifest(write_manifest(dir, {dur})); });
  expect_code(ErrorCode::MissingFile, [&] { parse_manifest(dir / "absent.json"); });
}

TEST(AuCsv, ThreeRowIdentityParse) {
  std::string text = "frame";
  const auto& aus = expression_aus(Expression::Smile);
  for (int au : aus) text += "," + au_name(au) + "_r," + au_name(au) + "_c";
  text += "\n";
  for (int f = 0; f < 3; ++f) {
    text += std::to_string(f);
    for (int au : aus) text += (au == 12 ? "," + std::to_string(f + 1) + ".0" : std::string(",0.5")) + ",1";
    text += "\n";
  }
  const auto s = parse_au_csv_text(text, Expression::Smile);
  EXPECT_EQ(s.frame_count, 3u);
  EXPECT_EQ(s.au_intensity.at("AU12"), (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(s.au_activation.at("AU12"), (std::vector<int>{1, 1, 1}));
  EXPECT_EQ(s.au_intensity.size(), 7u);
}

TEST(AuCsv, MissingBlinkActivationForSmile) {
  std::string header = "frame";
  for (int au : expression_aus(Expression::Smile)) {
    header += "," + au_name(au) + "_r";
    if (au != 45) header += "," + au_name(au) + "_c";
  }
  try {
    parse_au_csv_text(header + "\n0" + std::string(13, ',') + "\n", Expression::Smile);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingColumn);
    EXPECT_NE(std::string(e.what()).find("AU45_c"), std::string::npos);
  }
}

TEST(AuCsv, IntensityAboveFiveRejected) {
  auto row = smile_row(0, 1.0, 1);
  row.replace(row.find(",1,"), 3, ",7.2,");  // first intensity column is AU01
  expect_code(ErrorCode::OutOfRange, [&] { parse_au_csv_text(smile_csv({row}), Expression::Smile); });
}

TEST(AuCsv, ErrorsForEmptyAndNonNumeric) {
  expect_code(ErrorCode::EmptyFile, [&] { parse_au_csv_text(smile_csv({}), Expression::Smile); });
  expect_code(ErrorCode::EmptyFile, [&] { parse_au_csv_text("", Expression::Smile); });
  auto row = smile_row(0, 1.0, 1);
  row.replace(row.find(",1,"), 3, ",abc,");
  expect_code(ErrorCode::NonNumericCell, [&] { parse_au_csv_text(smile_csv({row}), Expression::Smile); });
  expect_code(ErrorCode::OutOfRange,
              [&] { parse_au_csv_text(smile_csv({smile_row(0, 1.0, 2)}), Expression::Smile); });
}

TEST(AuCsv, RowsSortedByFrame) {
  const auto s = parse_au_csv_text(smile_csv({smile_row(2, 3.0, 1), smile_row(0, 1.0, 1), smile_row(1, 2.0, 0)}),
                                   Expression::Smile);
  EXPECT_EQ(s.frame_index, (std::vector<long>{0, 1, 2}));
  EXPECT_EQ(s.au_intensity.at("AU06"), (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(s.au_activation.at("AU06"), (std::vector<int>{1, 0, 1}));
}

TEST(AuCsv, OnlyExpressionAusKept) {
  auto text = smile_csv({smile_row(0, 1.0, 1)}, ",AU09_r,AU09_c");
  text.replace(text.find("\n", text.find("\n") + 1), 1, ",4.0,1\n");
  const auto s = parse_au_csv_text(text, Expression::Smile);
  EXPECT_EQ(s.au_intensity.count("AU09"), 0u);
}

// Property: column order in the header does not matter.
TEST(AuCsv, ColumnOrderInsensitive) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto s = ht::random_recording(rng, "", Expression::Disgust, 6, trial % 2 == 0);
    s.landmarks.clear();
    const auto canonical = write_au_csv(s);
    std::vector<std::vector<std::string>> cells;
    std::istringstream in(canonical);
    for (std::string line; std::getline(in, line);) cells.push_back(csv::split_line(line));
    std::vector<std::size_t> perm(cells[0].size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng.shuffle(std::span<std::size_t>(perm));
    std::string shuffled;
    for (const auto& row : cells) {
      for (std::size_t i = 0; i < perm.size(); ++i) shuffled += (i ? "," : "") + row[perm[i]];
      shuffled += "\n";
    }
    EXPECT_EQ(parse_au_csv_text(shuffled, Expression::Disgust), parse_au_csv_text(canonical, Expression::Disgust));
  }
}

// Property: write then parse reproduces the series.
TEST(AuCsv, RoundTrip) {
  Rng rng(4);
  for (auto e : kAllExpressions) {
    for (int trial = 0; trial < 10; ++trial) {
      auto s = ht::random_recording(rng, "", e, 1 + trial, false);
      s.landmarks.clear();
      if (trial % 2) {
        std::vector<double> conf;
        for (std::size_t f = 0; f < s.frame_count; ++f) conf.push_back(rng.uniform());
        s.confidence = conf;
      }
      EXPECT_EQ(parse_au_csv_text(write_au_csv(s), e), s);
    }
  }
}

TEST(Landmarks, TwoFramesParse) {
  const auto text = landmark_header(kLandmarkCount) + "\n" + landmark_row(0, kLandmarkCount, 0.5) + "\n" +
                    landmark_row(1, kLandmarkCount, 0.25) + "\n";
  const auto s = parse_landmark_text(text);
  EXPECT_EQ(s.frame_count, 2u);
  ASSERT_EQ(s.landmarks.size(), 2 * kLandmarkCount);
  EXPECT_DOUBLE_EQ(s.landmark_frame(1)[477].z, 0.25);
}

TEST(Landmarks, RaggedFrameAndEmptyFile) {
  const auto text = landmark_header(kLandmarkCount) + "\n" + landmark_row(0, 400, 0.5) + "\n";
  expect_code(ErrorCode::RaggedFrame, [&] { parse_landmark_text(text); });
  expect_code(ErrorCode::EmptyFile, [&] { parse_landmark_text(""); });
  expect_code(ErrorCode::EmptyFile, [&] { parse_landmark_text(landmark_header(kLandmarkCount) + "\n"); });
  auto bad = landmark_row(0, kLandmarkCount, 0.5);
  bad.replace(bad.rfind(','), std::string::npos, ",zz");
  expect_code(ErrorCode::NonNumericCell, [&] { parse_landmark_text(landmark_header(kLandmarkCount) + "\n" + bad); });
}

TEST(Landmarks, FrameOrderPreservedAndRoundTrip) {
  Rng rng(5);
  auto s = ht::random_recording(rng, "", Expression::Smile, 3, true);
  s.frame_index = {5, 2, 9};
  RecordingSeries lm;
  lm.frame_count = 3;
  lm.frame_index = s.frame_index;
  lm.landmarks = s.landmarks;
  const auto parsed = parse_landmark_text(write_landmark_csv(lm));
  EXPECT_EQ(parsed.frame_index, (std::vector<long>{5, 2, 9}));
  EXPECT_EQ(parsed, lm);
}

TEST(Validation, ActiveFractionsAndFlags) {
  RecordingSeries s;
  s.frame_count = 10;
  s.au_intensity["AU12"] = std::vector<double>(10, 2.0);
  s.au_activation["AU12"] = std::vector<int>(10, 1);
  s.au_intensity["AU45"] = std::vector<double>(10, 0.0);
  s.au_activation["AU45"] = std::vector<int>(10, 0);
  auto report = validate_recording(s);
  EXPECT_EQ(report.frame_count, 10u);
  EXPECT_DOUBLE_EQ(report.active_fraction.at("AU12"), 1.0);
  EXPECT_EQ(report.never_active, (std::vector<std::string>{"AU45"}));
  EXPECT_FALSE(report.confidence_available);

  s.confidence = std::vector<double>{0.9, 0.9, 0.5, 0.9, 0.9, 0.74, 0.9, 0.9, 0.9, 1.0};
  report = validate_recording(s);
  EXPECT_TRUE(report.confidence_available);
  EXPECT_EQ(report.low_confidence_frames, 2u);
  EXPECT_DOUBLE_EQ(report.confidence_min, 0.5);
}

TEST(Validation, LowConfidenceFilterIsOptIn) {
  RecordingSeries s;
  s.frame_count = 3;
  s.frame_index = {0, 1, 2};
  s.au_intensity["AU12"] = {1.0, 2.0, 3.0};
  s.au_activation["AU12"] = {1, 1, 1};
  EXPECT_EQ(filter_low_confidence(s, 0.75), s);
  s.confidence = std::vector<double>{0.9, 0.2, 0.8};
  const auto kept = filter_low_confidence(s, 0.75);
  EXPECT_EQ(kept.frame_count, 2u);
  EXPECT_EQ(kept.au_intensity.at("AU12"), (std::vector<double>{1.0, 3.0}));
}

// Fuzz: random mutations of a valid file either parse into a series that
// satisfies every type invariant or raise a typed error.
TEST(AuCsv, FuzzedFilesParseValidOrFailTyped) {
  Rng rng(6);
  const std::string alphabet = "0123456789.,-e\nabAU_rc ";
  for (int trial = 0; trial < 300; ++trial) {
    auto s = ht::random_recording(rng, "", Expression::Surprise, 4, false);
    s.landmarks.clear();
    std::string text = write_au_csv(s);
    const int edits = 1 + static_cast<int>(rng.below(4));
    for (int k = 0; k < edits; ++k) text[rng.below(text.size())] = alphabet[rng.below(alphabet.size())];
    try {
      const auto parsed = parse_au_csv_text(text, Expression::Surprise);
      ASSERT_GE(parsed.frame_count, 1u);
      EXPECT_EQ(parsed.au_intensity.size(), 7u);
      for (const auto& [name, values] : parsed.au_intensity) {
        ASSERT_EQ(values.size(), parsed.frame_count);
        for (double v : values) EXPECT_TRUE(v >= 0.0 && v <= 5.0);
        for (int a : parsed.au_activation.at(name)) EXPECT_TRUE(a == 0 || a == 1);
      }
      EXPECT_TRUE(std::is_sorted(parsed.frame_index.begin(), parsed.frame_index.end()));
    } catch (const Error& e) {
      EXPECT_EQ(error_category(e.code()), ErrorCategory::Data);
    }
  }
}
