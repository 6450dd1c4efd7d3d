#include "hyposcreen/dataset.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "hyposcreen/csv.hpp"
#include "hyposcreen/error.hpp"

namespace hyposcreen {

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.feature_names = feature_names;
  out.features = features.select_rows(rows);
  for (std::size_t r : rows) {
    out.labels.push_back(labels[r]);
    out.participant_ids.push_back(participant_ids[r]);
    out.demographics.push_back(demographics[r]);
  }
  return out;
}

LabeledDataset LabeledDataset::with_features(std::span<const std::string> names) const {
  LabeledDataset out = *this;
  out.feature_names.assign(names.begin(), names.end());
  out.features = features.select_cols(column_indices(feature_names, names));
  return out;
}

std::vector<std::size_t> column_indices(std::span<const std::string> available,
                                        std::span<const std::string> wanted) {
  std::map<std::string_view, std::size_t> position;
  for (std::size_t i = 0; i < available.size(); ++i) position.emplace(available[i], i);
  std::vector<std::size_t> out;
  out.reserve(wanted.size());
  for (const auto& name : wanted) {
    const auto it = position.find(name);
    if (it == position.end()) throw Error(ErrorCode::MissingFeature, name);
    out.push_back(it->second);
  }
  return out;
}

namespace {

std::string optional_text(const std::optional<std::string>& v) {
  return v ? csv::quote_if_needed(*v) : std::string{};
}

std::string optional_number(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string{};
}

}  // namespace

std::string write_feature_table(const LabeledDataset& data) {
  std::ostringstream out;
  for (std::size_t i = 0; i < std::size(kMetadataColumns); ++i) out << (i ? "," : "") << kMetadataColumns[i];
  for (const auto& name : data.feature_names) out << ',' << csv::quote_if_needed(name);
  out << '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto& demo = data.demographics[r];
    out << csv::quote_if_needed(data.participant_ids[r]) << ',' << data.labels[r] << ','
        << csv::quote_if_needed(demo.cohort) << ',' << optional_text(demo.sex) << ','
        << optional_number(demo.age) << ',' << optional_text(demo.ethnicity) << ','
        << optional_number(demo.disease_duration);
    for (double v : data.features.row(r)) out << ',' << csv::format_double(v);
    out << '\n';
  }
  return out.str();
}

LabeledDataset parse_feature_table(std::string_view text) {
  std::vector<std::string> lines;
  {
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!csv::trim(line).empty()) lines.push_back(std::move(line));
    }
  }
  if (lines.empty()) throw Error(ErrorCode::EmptyFile, "feature table is empty");

  const auto header = csv::split_line(lines[0]);
  const std::size_t meta = std::size(kMetadataColumns);
  if (header.size() < meta) throw Error(ErrorCode::MissingColumn, std::string(kMetadataColumns[header.size()]));
  for (std::size_t i = 0; i < meta; ++i)
    if (header[i] != kMetadataColumns[i]) throw Error(ErrorCode::MissingColumn, std::string(kMetadataColumns[i]));

  LabeledDataset data;
  data.feature_names.assign(header.begin() + static_cast<std::ptrdiff_t>(meta), header.end());
  data.features = Matrix(0, data.feature_names.size());
  std::vector<double> row(data.feature_names.size());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = csv::split_line(lines[r]);
    if (cells.size() != header.size())
      throw Error(ErrorCode::SchemaViolation, "row " + std::to_string(r) + " has " +
                                                  std::to_string(cells.size()) + " cells");
    data.participant_ids.push_back(cells[0]);
    if (cells[1] == "1" || cells[1] == "pd")
      data.labels.push_back(1);
    else if (cells[1] == "0" || cells[1] == "non_pd")
      data.labels.push_back(0);
    else
      throw Error(ErrorCode::SchemaViolation, "field 'label' in row " + std::to_string(r));

    Demographics demo;
    demo.cohort = cells[2];
    if (!cells[3].empty()) demo.sex = cells[3];
    if (!cells[4].empty()) {
      demo.age = csv::parse_double(cells[4]);
      if (!demo.age) throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(r) + ", column 'age'");
    }
    if (!cells[5].empty()) demo.ethnicity = cells[5];
    if (!cells[6].empty()) {
      demo.disease_duration = csv::parse_double(cells[6]);
      if (!demo.disease_duration)
        throw Error(ErrorCode::NonNumericCell, "row " + std::to_string(r) + ", column 'disease_duration'");
    }
    data.demographics.push_back(std::move(demo));

    for (std::size_t j = 0; j < row.size(); ++j) {
      const auto v = csv::parse_double(cells[meta + j]);
      if (!v)
        throw Error(ErrorCode::NonNumericCell,
                    "row " + std::to_string(r) + ", column '" + data.feature_names[j] + "'");
      row[j] = *v;
    }
    data.features.append_row(row);
  }
  return data;
}

LabeledDataset read_feature_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_feature_table(buffer.str());
}

}  // namespace hyposcreen
