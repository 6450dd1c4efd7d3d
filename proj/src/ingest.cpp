#include "hyposcreen/ingest.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "hyposcreen/csv.hpp"
#include "hyposcreen/error.hpp"

namespace hyposcreen {

using nlohmann::json;

std::string_view to_string(Expression e) {
  switch (e) {
    case Expression::Smile: return "smile";
    case Expression::Disgust: return "disgust";
    case Expression::Surprise: return "surprise";
  }
  return "";
}

std::string_view to_string(Diagnosis d) { return d == Diagnosis::Pd ? "pd" : "non_pd"; }

std::string_view to_string(Cohort c) {
  switch (c) {
    case Cohort::HomeGlobal: return "home_global";
    case Cohort::Clinic: return "clinic";
    case Cohort::PdCare: return "pd_care";
    case Cohort::HomeBd: return "home_bd";
  }
  return "";
}

std::string_view to_string(Sex s) {
  switch (s) {
    case Sex::Male: return "male";
    case Sex::Female: return "female";
    case Sex::Other: return "other";
  }
  return "";
}

std::optional<Expression> parse_expression(std::string_view text) {
  for (auto e : kAllExpressions)
    if (to_string(e) == text) return e;
  return std::nullopt;
}

std::optional<Diagnosis> parse_diagnosis(std::string_view text) {
  if (text == "pd") return Diagnosis::Pd;
  if (text == "non_pd") return Diagnosis::NonPd;
  return std::nullopt;
}

std::optional<Cohort> parse_cohort(std::string_view text) {
  for (auto c : {Cohort::HomeGlobal, Cohort::Clinic, Cohort::PdCare, Cohort::HomeBd})
    if (to_string(c) == text) return c;
  return std::nullopt;
}

std::optional<Sex> parse_sex(std::string_view text) {
  for (auto s : {Sex::Male, Sex::Female, Sex::Other})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

const std::array<int, kAusPerExpression>& expression_aus(Expression e) {
  static constexpr std::array<int, kAusPerExpression> smile{1, 6, 12, 14, 25, 26, 45};
  static constexpr std::array<int, kAusPerExpression> disgust{4, 7, 9, 10, 25, 26, 45};
  static constexpr std::array<int, kAusPerExpression> surprise{1, 2, 4, 5, 25, 26, 45};
  switch (e) {
    case Expression::Smile: return smile;
    case Expression::Disgust: return disgust;
    case Expression::Surprise: return surprise;
  }
  return smile;
}

std::string au_name(int au) {
  std::string digits = std::to_string(au);
  if (digits.size() < 2) digits.insert(0, "0");
  return "AU" + digits;
}

namespace {

[[noreturn]] void schema_violation(std::string_view field, std::size_t row) {
  throw Error(ErrorCode::SchemaViolation,
              "field '" + std::string(field) + "' in entry " + std::to_string(row));
}

const json* optional_field(const json& entry, const char* name) {
  const auto it = entry.find(name);
  if (it == entry.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string required_string(const json& entry, const char* name, std::size_t row) {
  const auto it = entry.find(name);
  if (it == entry.end() || !it->is_string() || it->get<std::string>().empty())
    schema_violation(name, row);
  return it->get<std::string>();
}

template <typename T, typename Parser>
T required_enum(const json& entry, const char* name, std::size_t row, Parser parse) {
  const auto value = parse(required_string(entry, name, row));
  if (!value) schema_violation(name, row);
  return *value;
}

}  // namespace

Manifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
    throw Error(ErrorCode::SchemaViolation, "field 'entries' missing or not an array");

  const auto base = path.parent_path();
  Manifest manifest;
  std::size_t row = 0;
  for (const auto& item : doc["entries"]) {
    if (!item.is_object()) schema_violation("entry", row);
    ManifestEntry entry;
    entry.participant_id = required_string(item, "participant_id", row);
    entry.expression = required_enum<Expression>(item, "expression", row, parse_expression);
    entry.au_path = required_string(item, "au_path", row);
    entry.landmark_path = required_string(item, "landmark_path", row);
    entry.label = required_enum<Diagnosis>(item, "label", row, parse_diagnosis);
    entry.cohort = required_enum<Cohort>(item, "cohort", row, parse_cohort);
    if (const json* sex = optional_field(item, "sex")) {
      if (!sex->is_string()) schema_violation("sex", row);
      entry.sex = parse_sex(sex->get<std::string>());
      if (!entry.sex) schema_violation("sex", row);
    }
    if (const json* age = optional_field(item, "age")) {
      if (!age->is_number()) schema_violation("age", row);
      entry.age = age->get<double>();
      if (*entry.age < 18.0 || *entry.age > 120.0) schema_violation("age", row);
    }
    if (const json* eth = optional_field(item, "ethnicity")) {
      if (!eth->is_string()) schema_violation("ethnicity", row);
      entry.ethnicity = eth->get<std::string>();
    }
    if (const json* dur = optional_field(item, "disease_duration")) {
      if (!dur->is_number()) schema_violation("disease_duration", row);
      entry.disease_duration = dur->get<double>();
      if (*entry.disease_duration < 0.0) schema_violation("disease_duration", row);
    }
    if (entry.au_path.is_relative()) entry.au_path = base / entry.au_path;
    if (entry.landmark_path.is_relative()) entry.landmark_path = base / entry.landmark_path;
    manifest.entries.push_back(std::move(entry));
    ++row;
  }

  std::set<std::pair<std::string, Expression>> seen;
  for (const auto& entry : manifest.entries) {
    if (!seen.emplace(entry.participant_id, entry.expression).second)
      throw Error(ErrorCode::DuplicateEntry,
                  "(" + entry.participant_id + ", " + std::string(to_string(entry.expression)) + ")");
  }
  for (const auto& entry : manifest.entries) {
    for (const auto& p : {entry.au_path, entry.landmark_path})
      if (!std::filesystem::exists(p)) throw Error(ErrorCode::MissingFile, p.string());
  }
  return manifest;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  while (!lines.empty() && csv::trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

double numeric_cell(const std::string& cell, std::size_t row, std::string_view column) {
  const auto value = csv::parse_double(cell);
  if (!value)
    throw Error(ErrorCode::NonNumericCell,
                "row " + std::to_string(row) + ", column '" + std::string(column) + "'");
  return *value;
}

long frame_number(const std::string& cell, std::size_t row) {
  const double v = numeric_cell(cell, row, "frame");
  if (v != static_cast<double>(static_cast<long>(v)))
    throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(row) + ", column 'frame'");
  return static_cast<long>(v);
}

// Returns the permutation that orders rows by frame number.
std::vector<std::size_t> frame_order(const std::vector<long>& frames) {
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frames[a] < frames[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (frames[order[i]] == frames[order[i - 1]])
      throw Error(ErrorCode::SchemaViolation,
                  "field 'frame' duplicated at frame " + std::to_string(frames[order[i]]));
  return order;
}

template <typename T>
std::vector<T> permute(const std::vector<T>& values, const std::vector<std::size_t>& order) {
  std::vector<T> out(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) out[i] = values[order[i]];
  return out;
}

}  // namespace

RecordingSeries parse_au_csv(const std::filesystem::path& path, Expression expression) {
  return parse_au_csv_text(read_file(path), expression);
}

RecordingSeries parse_au_csv_text(std::string_view text, Expression expression) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw Error(ErrorCode::EmptyFile, "AU table has no data rows");

  const auto header = csv::split_line(lines[0]);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) column.emplace(header[i], i);

  auto require = [&](const std::string& name) {
    const auto it = column.find(name);
    if (it == column.end()) throw Error(ErrorCode::MissingColumn, name);
    return it->second;
  };

  const std::size_t frame_col = require("frame");
  struct AuColumns {
    std::string name;
    std::size_t intensity;
    std::size_t activation;
  };
  std::vector<AuColumns> aus;
  for (int au : expression_aus(expression)) {
    const auto name = au_name(au);
    aus.push_back({name, require(name + "_r"), require(name + "_c")});
  }
  std::optional<std::size_t> confidence_col;
  if (auto it = column.find("confidence"); it != column.end())
    confidence_col = it->second;
  else if (auto it2 = column.find("success"); it2 != column.end())
    confidence_col = it2->second;

  RecordingSeries series;
  series.expression = expression;
  std::vector<long> frames;
  std::vector<std::vector<double>> intensity(aus.size());
  std::vector<std::vector<int>> activation(aus.size());
  std::vector<double> confidence;

  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (csv::trim(lines[r]).empty()) continue;
    const auto cells = csv::split_line(lines[r]);
    if (cells.size() != header.size())
      throw Error(ErrorCode::NonNumericCell,
                  "row " + std::to_string(r) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    frames.push_back(frame_number(cells[frame_col], r));
    for (std::size_t a = 0; a < aus.size(); ++a) {
      const auto& au = aus[a];
      const double value = numeric_cell(cells[au.intensity], r, au.name + "_r");
      if (value < 0.0 || value > 5.0)
        throw Error(ErrorCode::OutOfRange, "row " + std::to_string(r) + ", column '" + au.name +
                                               "_r' = " + cells[au.intensity]);
      const double active = numeric_cell(cells[au.activation], r, au.name + "_c");
      if (active != 0.0 && active != 1.0)
        throw Error(ErrorCode::OutOfRange, "row " + std::to_string(r) + ", column '" + au.name +
                                               "_c' = " + cells[au.activation]);
      intensity[a].push_back(value);
      activation[a].push_back(static_cast<int>(active));
    }
    if (confidence_col) {
      const double c = numeric_cell(cells[*confidence_col], r, header[*confidence_col]);
      if (c < 0.0 || c > 1.0)
        throw Error(ErrorCode::OutOfRange,
                    "row " + std::to_string(r) + ", column '" + header[*confidence_col] + "'");
      confidence.push_back(c);
    }
  }
  if (frames.empty()) throw Error(ErrorCode::EmptyFile, "AU table has no data rows");

  const auto order = frame_order(frames);
  series.frame_count = frames.size();
  series.frame_index = permute(frames, order);
  for (std::size_t a = 0; a < aus.size(); ++a) {
    series.au_intensity[aus[a].name] = permute(intensity[a], order);
    series.au_activation[aus[a].name] = permute(activation[a], order);
  }
  if (confidence_col) series.confidence = permute(confidence, order);
  return series;
}

RecordingSeries parse_landmark_series(const std::filesystem::path& path) {
  return parse_landmark_text(read_file(path));
}

RecordingSeries parse_landmark_text(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw Error(ErrorCode::EmptyFile, "landmark table has no data rows");
  const auto header = csv::split_line(lines[0]);
  if (header.empty() || header[0] != "frame") throw Error(ErrorCode::MissingColumn, "frame");

  std::vector<long> frames;
  std::vector<std::vector<Point3>> points;
  std::size_t frame_idx = 0;
  for (std::size_t r = 1; r < lines.size(); ++r, ++frame_idx) {
    if (csv::trim(lines[r]).empty()) continue;
    const auto cells = csv::split_line(lines[r]);
    const std::size_t coords = cells.size() - 1;
    if (coords % 3 != 0 || coords / 3 != kLandmarkCount)
      throw Error(ErrorCode::RaggedFrame, "frame " + std::to_string(frame_idx) + " has " +
                                              std::to_string(coords / 3) + " points");
    frames.push_back(frame_number(cells[0], r));
    std::vector<Point3> frame(kLandmarkCount);
    for (std::size_t p = 0; p < kLandmarkCount; ++p) {
      frame[p].x = numeric_cell(cells[1 + 3 * p], r, "x");
      frame[p].y = numeric_cell(cells[2 + 3 * p], r, "y");
      frame[p].z = numeric_cell(cells[3 + 3 * p], r, "z");
    }
    points.push_back(std::move(frame));
  }
  if (frames.empty()) throw Error(ErrorCode::EmptyFile, "landmark table has no data rows");
  if (header.size() != 1 + 3 * kLandmarkCount)
    throw Error(ErrorCode::RaggedFrame,
                "header declares " + std::to_string((header.size() - 1) / 3) + " points");

  RecordingSeries series;
  series.frame_count = frames.size();
  // Frame order is preserved as written.
  series.frame_index = frames;
  series.landmarks.reserve(frames.size() * kLandmarkCount);
  for (const auto& frame : points) series.landmarks.insert(series.landmarks.end(), frame.begin(), frame.end());
  return series;
}

std::string write_au_csv(const RecordingSeries& series) {
  std::ostringstream out;
  out << "frame";
  for (const auto& [name, _] : series.au_intensity) out << ',' << name << "_r";
  for (const auto& [name, _] : series.au_activation) out << ',' << name << "_c";
  if (series.confidence) out << ",confidence";
  out << '\n';
  for (std::size_t f = 0; f < series.frame_count; ++f) {
    out << series.frame_index[f];
    for (const auto& [_, values] : series.au_intensity) out << ',' << csv::format_double(values[f]);
    for (const auto& [_, values] : series.au_activation) out << ',' << values[f];
    if (series.confidence) out << ',' << csv::format_double((*series.confidence)[f]);
    out << '\n';
  }
  return out.str();
}

std::string write_landmark_csv(const RecordingSeries& series) {
  std::ostringstream out;
  out << "frame";
  for (std::size_t p = 0; p < kLandmarkCount; ++p) {
    char name[8];
    std::snprintf(name, sizeof name, "p%03zu", p);
    out << ',' << name << "_x," << name << "_y," << name << "_z";
  }
  out << '\n';
  for (std::size_t f = 0; f < series.frame_count; ++f) {
    out << series.frame_index[f];
    const Point3* frame = series.landmark_frame(f);
    for (std::size_t p = 0; p < kLandmarkCount; ++p)
      out << ',' << csv::format_double(frame[p].x) << ',' << csv::format_double(frame[p].y) << ','
          << csv::format_double(frame[p].z);
    out << '\n';
  }
  return out.str();
}

RecordingSeries merge_series(RecordingSeries au_part, RecordingSeries landmark_part) {
  if (au_part.frame_count != landmark_part.frame_count)
    throw Error(ErrorCode::LengthMismatch,
                "AU table has " + std::to_string(au_part.frame_count) +
                    " frames, landmark table has " + std::to_string(landmark_part.frame_count));
  au_part.landmarks = std::move(landmark_part.landmarks);
  return au_part;
}

RecordingSeries filter_low_confidence(const RecordingSeries& series, double threshold) {
  if (!series.confidence) return series;
  std::vector<std::size_t> keep;
  for (std::size_t f = 0; f < series.frame_count; ++f)
    if ((*series.confidence)[f] >= threshold) keep.push_back(f);
  if (keep.empty()) throw Error(ErrorCode::EmptySeries, "no frames at or above min-confidence");

  RecordingSeries out;
  out.participant_id = series.participant_id;
  out.expression = series.expression;
  out.frame_count = keep.size();
  out.frame_index = permute(series.frame_index, keep);
  for (const auto& [name, values] : series.au_intensity) out.au_intensity[name] = permute(values, keep);
  for (const auto& [name, values] : series.au_activation) out.au_activation[name] = permute(values, keep);
  out.confidence = permute(*series.confidence, keep);
  if (series.has_landmarks()) {
    for (std::size_t f : keep) {
      const Point3* frame = series.landmark_frame(f);
      out.landmarks.insert(out.landmarks.end(), frame, frame + kLandmarkCount);
    }
  }
  return out;
}

ValidationReport validate_recording(const RecordingSeries& series) {
  ValidationReport report;
  report.frame_count = series.frame_count;
  for (const auto& [name, active] : series.au_activation) {
    const auto on = std::count(active.begin(), active.end(), 1);
    report.active_fraction[name] =
        active.empty() ? 0.0 : static_cast<double>(on) / static_cast<double>(active.size());
    if (on == 0) report.never_active.push_back(name);
  }
  if (series.confidence && !series.confidence->empty()) {
    const auto& c = *series.confidence;
    report.confidence_available = true;
    report.confidence_mean = std::accumulate(c.begin(), c.end(), 0.0) / static_cast<double>(c.size());
    report.confidence_min = *std::min_element(c.begin(), c.end());
    report.low_confidence_frames = static_cast<std::size_t>(
        std::count_if(c.begin(), c.end(), [](double v) { return v < kLowConfidence; }));
  }
  return report;
}

}  // namespace hyposcreen
