#include "hyposcreen/report.hpp"

#include <cmath>
#include <cstdio>

#include "hyposcreen/csv.hpp"
#include "hyposcreen/error.hpp"

namespace hyposcreen {

namespace {

constexpr double kMargin = 60.0;
constexpr double kSide = 360.0;

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string plot_point(double fpr, double tpr) {
  return fixed2(kMargin + fpr * kSide) + "," + fixed2(kMargin + (1.0 - tpr) * kSide);
}

}  // namespace

std::string roc_csv(const RocCurve& roc) {
  std::string out = "fpr,tpr,threshold\n";
  for (const auto& p : roc.points) {
    const std::string threshold = std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf")
                                                          : csv::format_double(p.threshold);
    out += csv::format_double(p.fpr) + ',' + csv::format_double(p.tpr) + ',' + threshold + '\n';
  }
  return out;
}

std::string roc_svg(const RocCurve& roc) {
  if (roc.points.empty()) throw Error(ErrorCode::IoError, "refusing to plot an empty ROC curve");
  const std::string lo = fixed2(kMargin), hi = fixed2(kMargin + kSide);
  std::string polyline;
  for (const auto& p : roc.points) {
    if (!polyline.empty()) polyline += ' ';
    polyline += plot_point(p.fpr, p.tpr);
  }
  char auc[64];
  std::snprintf(auc, sizeof auc, "AUROC = %.4f", roc.auroc);

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" viewBox=\"0 0 480 480\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"480\" height=\"480\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + lo + "\" y=\"" + lo + "\" width=\"" + fixed2(kSide) + "\" height=\"" + fixed2(kSide) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + lo + "\" y1=\"" + hi + "\" x2=\"" + hi + "\" y2=\"" + lo +
         "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"" + polyline + "\"/>\n";
  svg += "<text x=\"240\" y=\"460\" text-anchor=\"middle\" font-size=\"14\">False positive rate</text>\n";
  svg += "<text x=\"20\" y=\"240\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 20 240)\">"
         "True positive rate</text>\n";
  svg += "<text x=\"" + fixed2(kMargin + kSide - 8.0) + "\" y=\"" + fixed2(kMargin + kSide - 12.0) +
         "\" text-anchor=\"end\" font-size=\"14\">" + auc + "</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string shap_csv(std::span<const ShapAttribution> attributions, std::span<const std::string> row_ids,
                     std::span<const std::string> feature_names, const Matrix& feature_values) {
  if (attributions.size() != row_ids.size() || attributions.size() != feature_values.rows())
    throw Error(ErrorCode::LengthMismatch, "attribution, id and row counts differ");
  std::string out = "row_id,feature,shap_value,feature_value\n";
  for (std::size_t r = 0; r < attributions.size(); ++r) {
    const auto& a = attributions[r];
    if (a.values.size() != feature_names.size() || feature_values.cols() != feature_names.size())
      throw Error(ErrorCode::WidthMismatch, "attribution width differs from feature count");
    const std::string id = csv::quote_if_needed(row_ids[r]);
    for (std::size_t f = 0; f < feature_names.size(); ++f)
      out += id + ',' + csv::quote_if_needed(feature_names[f]) + ',' + csv::format_double(a.values[f]) + ',' +
             csv::format_double(feature_values(r, f)) + '\n';
  }
  return out;
}

std::string projection_csv(const Projection2D& projection, std::span<const std::string> row_ids,
                           std::span<const int> labels) {
  const Matrix& c = projection.coordinates;
  if (c.rows() != row_ids.size() || c.rows() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "projection, id and label counts differ");
  if (c.cols() < 2) throw Error(ErrorCode::BadShape, "projection has fewer than two components");
  std::string out = "row_id,pc1,pc2,label\n";
  for (std::size_t r = 0; r < c.rows(); ++r)
    out += csv::quote_if_needed(row_ids[r]) + ',' + csv::format_double(c(r, 0)) + ',' +
           csv::format_double(c(r, 1)) + ',' + std::to_string(labels[r]) + '\n';
  return out;
}

std::string predictions_csv(std::span<const std::string> row_ids, std::span<const double> probabilities,
                            double threshold) {
  if (row_ids.size() != probabilities.size())
    throw Error(ErrorCode::LengthMismatch, "id and probability counts differ");
  std::string out = "participant_id,probability,predicted\n";
  for (std::size_t r = 0; r < row_ids.size(); ++r)
    out += csv::quote_if_needed(row_ids[r]) + ',' + csv::format_double(probabilities[r]) + ',' +
           (probabilities[r] >= threshold ? "1" : "0") + '\n';
  return out;
}

PredictionTable parse_predictions_csv(std::string_view text) {
  PredictionTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    if (line_no == 1) {
      if (csv::split_line(line) != std::vector<std::string>{"participant_id", "probability", "predicted"})
        throw Error(ErrorCode::SchemaViolation, "prediction header must be participant_id,probability,predicted");
      continue;
    }
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != 3) throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + " needs 3 fields");
    const auto prob = csv::parse_double(fields[1]);
    if (!prob || *prob < 0.0 || *prob > 1.0)
      throw Error(ErrorCode::NonNumericCell, "bad probability on line " + std::to_string(line_no));
    if (fields[2] != "0" && fields[2] != "1")
      throw Error(ErrorCode::SchemaViolation, "predicted must be 0 or 1 on line " + std::to_string(line_no));
    table.row_ids.push_back(fields[0]);
    table.probabilities.push_back(*prob);
    table.predicted.push_back(fields[2] == "1" ? 1 : 0);
  }
  if (line_no == 0) throw Error(ErrorCode::EmptyFile, "prediction file is empty");
  return table;
}

void write_report(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create directory for " + path.string());
  csv::write_text(path, text);
}

}  // namespace hyposcreen
