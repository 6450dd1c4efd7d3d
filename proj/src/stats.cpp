#include "hyposcreen/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "hyposcreen/csv.hpp"
#include "hyposcreen/error.hpp"

namespace hyposcreen {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;
constexpr int kMaxIter = 100000;

// Lanczos approximation (g = 7, 9 terms), a > 0. Written out instead of
// std::lgamma, which writes the global signgam and is not thread-safe.
double log_gamma(double a) {
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (a < 0.5) return std::log(M_PI / std::abs(std::sin(M_PI * a))) - log_gamma(1.0 - a);
  a -= 1.0;
  double sum = c[0];
  for (std::size_t i = 1; i < c.size(); ++i) sum += c[i] / (a + static_cast<double>(i));
  const double t = a + 7.5;
  return 0.5 * std::log(2.0 * M_PI) + (a + 0.5) * std::log(t) - t + std::log(sum);
}

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

double gamma_prefactor(double a, double x) { return std::exp(-x + a * std::log(x) - log_gamma(a)); }

double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

TestResult z_core(double x1, double n1, double x2, double n2) {
  if (n1 < 1.0 || n2 < 1.0) throw Error(ErrorCode::DegenerateParams, "both samples need n >= 1");
  const double p1 = x1 / n1, p2 = x2 / n2;
  const double pooled = (x1 + x2) / (n1 + n2);
  if (!(pooled > 0.0 && pooled < 1.0))
    throw Error(ErrorCode::ZeroPooledVariance, "pooled proportion is " + csv::format_double(pooled));
  TestResult r;
  r.test = TestKind::ZTwoProportions;
  r.statistic = (p1 - p2) / std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
  r.p_value = normal_two_sided_p(r.statistic);
  r.preconditions_met = clt_conditions_hold(p1, n1) && clt_conditions_hold(p2, n2);
  if (!r.preconditions_met) r.notes = "np >= 5 and n(1-p) >= 5 not met in every sample";
  return r;
}

nlohmann::json number_or_text(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Distribution functions
// ---------------------------------------------------------------------------

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_two_sided_p(double z) { return std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0))); }

// Acklam's rational approximation followed by one Halley step on erfc.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::OutOfRange, "normal quantile needs p in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  const double low = 0.02425;
  double x;
  if (p < low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double regularized_gamma_p_series(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw Error(ErrorCode::OutOfRange, "incomplete gamma needs a > 0, x >= 0");
  if (x == 0.0) return 0.0;
  double ap = a, term = 1.0 / a, sum = term;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps) break;
  }
  return std::min(1.0, sum * gamma_prefactor(a, x));
}

double regularized_gamma_q_continued_fraction(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw Error(ErrorCode::OutOfRange, "incomplete gamma needs a > 0, x >= 0");
  if (x == 0.0) return 1.0;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / (std::abs(b) < kTiny ? kTiny : b);
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return std::clamp(gamma_prefactor(a, x) * h, 0.0, 1.0);
}

double regularized_gamma_q(double a, double x) {
  if (x < a + 1.0) return 1.0 - regularized_gamma_p_series(a, x);
  return regularized_gamma_q_continued_fraction(a, x);
}

double regularized_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::OutOfRange, "incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(log_gamma(a + b) - log_gamma(a) - log_gamma(b) + a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::OutOfRange, "t distribution needs df > 0");
  if (std::isinf(t)) return 0.0;
  return std::min(1.0, regularized_beta(0.5 * df, 0.5, df / (df + t * t)));
}

double chi_square_sf(double x, double df) {
  if (!(df > 0.0)) throw Error(ErrorCode::OutOfRange, "chi-square needs df > 0");
  if (x <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * df, 0.5 * x);
}

// ---------------------------------------------------------------------------
// Hypothesis tests
// ---------------------------------------------------------------------------

std::string_view to_string(TestKind kind) {
  switch (kind) {
    case TestKind::ZTwoProportions: return "z_two_prop";
    case TestKind::FisherExact: return "fisher_exact";
    case TestKind::Spearman: return "spearman";
    case TestKind::ChiSquare: return "chi_square";
  }
  return "";
}

nlohmann::json to_json(const TestResult& r) {
  nlohmann::json j = {{"test", to_string(r.test)},
                      {"statistic", number_or_text(r.statistic)},
                      {"p_value", r.p_value},
                      {"preconditions_met", r.preconditions_met},
                      {"notes", r.notes}};
  if (r.test == TestKind::ChiSquare) j["degrees_of_freedom"] = r.degrees_of_freedom;
  return j;
}

bool clt_conditions_hold(double rate, double n) { return n * rate >= 5.0 && n * (1.0 - rate) >= 5.0; }

TestResult z_two_proportions(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2) {
  if (x1 > n1 || x2 > n2) throw Error(ErrorCode::OutOfRange, "event count exceeds sample size");
  return z_core(static_cast<double>(x1), static_cast<double>(n1), static_cast<double>(x2),
                static_cast<double>(n2));
}

TestResult z_two_proportions_rates(double p1, std::size_t n1, double p2, std::size_t n2) {
  if (!(p1 >= 0.0 && p1 <= 1.0 && p2 >= 0.0 && p2 <= 1.0))
    throw Error(ErrorCode::OutOfRange, "rates must lie in [0, 1]");
  const auto a = static_cast<double>(n1), b = static_cast<double>(n2);
  return z_core(p1 * a, a, p2 * b, b);
}

TestResult fisher_exact(std::size_t a, std::size_t b, std::size_t c, std::size_t d) {
  const std::size_t row1 = a + b, row2 = c + d, col1 = a + c, n = row1 + row2;
  if (row1 == 0 || row2 == 0) throw Error(ErrorCode::DegenerateMargins, "a row of the table is empty");

  std::vector<double> log_fact(n + 1, 0.0);
  for (std::size_t i = 2; i <= n; ++i) log_fact[i] = log_fact[i - 1] + std::log(static_cast<double>(i));
  auto log_choose = [&](std::size_t k, std::size_t r) { return log_fact[k] - log_fact[r] - log_fact[k - r]; };
  auto log_prob = [&](std::size_t x) {
    return log_choose(row1, x) + log_choose(row2, col1 - x) - log_choose(n, col1);
  };

  const std::size_t lo = col1 > row2 ? col1 - row2 : 0;
  const std::size_t hi = std::min(row1, col1);
  const double observed = log_prob(a);
  const double cutoff = observed + std::log1p(1e-12);
  double p = 0.0;
  for (std::size_t x = lo; x <= hi; ++x) {
    const double lp = log_prob(x);
    if (lp <= cutoff) p += std::exp(lp);
  }

  TestResult r;
  r.test = TestKind::FisherExact;
  const double ad = static_cast<double>(a) * static_cast<double>(d);
  const double bc = static_cast<double>(b) * static_cast<double>(c);
  if (ad > 0.0) r.statistic = bc / ad;
  else r.statistic = bc > 0.0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
  if (std::isnan(r.statistic)) r.notes = "odds ratio undefined: ad = bc = 0";
  r.p_value = std::min(1.0, p);
  return r;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "spearman inputs differ in length");
  if (x.size() < 3) throw Error(ErrorCode::TooShort, "spearman needs at least 3 pairs");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isnan(x[i]) || std::isnan(y[i])) throw Error(ErrorCode::OutOfRange, "spearman input is NaN");
  if (is_constant(x) || is_constant(y)) throw Error(ErrorCode::ConstantInput, "spearman input is constant");

  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  TestResult r;
  r.test = TestKind::Spearman;
  r.statistic = pearson(rx, ry);
  const std::size_t n = x.size();

  if (n >= 10) {
    const double rho = r.statistic;
    if (std::abs(rho) >= 1.0) {
      r.p_value = 0.0;
    } else {
      const double df = static_cast<double>(n - 2);
      r.p_value = student_t_two_sided_p(rho * std::sqrt(df / (1.0 - rho * rho)), df);
    }
    r.notes = "t approximation";
    return r;
  }

  // Every permutation of y against x is equally likely under independence.
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> shuffled(n);
  const double target = std::abs(r.statistic) - 1e-12;
  std::size_t extreme = 0, total = 0;
  do {
    for (std::size_t i = 0; i < n; ++i) shuffled[i] = ry[perm[i]];
    if (std::abs(pearson(rx, shuffled)) >= target) ++extreme;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  r.p_value = static_cast<double>(extreme) / static_cast<double>(total);
  r.notes = "exact permutation distribution";
  return r;
}

TestResult chi_square(const std::vector<std::vector<double>>& observed) {
  const std::size_t rows = observed.size();
  if (rows < 2 || observed[0].size() < 2) throw Error(ErrorCode::BadShape, "chi-square needs at least a 2x2 table");
  const std::size_t cols = observed[0].size();
  std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (observed[i].size() != cols) throw Error(ErrorCode::BadShape, "chi-square table is ragged");
    for (std::size_t j = 0; j < cols; ++j) {
      const double o = observed[i][j];
      if (!(o >= 0.0)) throw Error(ErrorCode::OutOfRange, "chi-square counts must be >= 0");
      row_sum[i] += o;
      col_sum[j] += o;
      total += o;
    }
  }
  double stat = 0.0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const double e = row_sum[i] * col_sum[j] / total;
      if (!(e > 0.0))
        throw Error(ErrorCode::ZeroExpectedCell,
                    "expected count is zero in cell (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      stat += (observed[i][j] - e) * (observed[i][j] - e) / e;
    }
  TestResult r;
  r.test = TestKind::ChiSquare;
  r.statistic = stat;
  r.degrees_of_freedom = static_cast<double>((rows - 1) * (cols - 1));
  r.p_value = chi_square_sf(stat, r.degrees_of_freedom);
  return r;
}

RateInterval normal_approx_ci(std::size_t events, std::size_t n, double level, bool truncate) {
  if (n == 0) throw Error(ErrorCode::DegenerateParams, "interval needs n >= 1");
  if (events > n) throw Error(ErrorCode::OutOfRange, "event count exceeds sample size");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::OutOfRange, "level must lie in (0, 1)");
  const double z = level == 0.95 ? 1.96 : normal_quantile(0.5 * (1.0 + level));
  RateInterval ci;
  const auto nn = static_cast<double>(n);
  ci.rate = static_cast<double>(events) / nn;
  ci.half_width = z * std::sqrt(ci.rate * (1.0 - ci.rate) / nn);
  ci.lo = ci.rate - ci.half_width;
  ci.hi = ci.rate + ci.half_width;
  if (truncate) {
    ci.lo = std::max(0.0, ci.lo);
    ci.hi = std::min(1.0, ci.hi);
  }
  ci.preconditions_met = clt_conditions_hold(ci.rate, nn);
  return ci;
}

// ---------------------------------------------------------------------------
// Bias report
// ---------------------------------------------------------------------------

std::string_view to_string(BiasMetric metric) {
  switch (metric) {
    case BiasMetric::Misclassification: return "misclassification";
    case BiasMetric::Underdiagnosis: return "underdiagnosis";
    case BiasMetric::Overdiagnosis: return "overdiagnosis";
  }
  return "";
}

namespace {

std::optional<std::string> categorical_value(const Demographics& d, std::string_view column) {
  if (column == "cohort") return d.cohort.empty() ? std::nullopt : std::optional(d.cohort);
  if (column == "sex") return d.sex;
  return d.ethnicity;
}

std::optional<double> continuous_value(const Demographics& d, std::string_view column) {
  return column == "age" ? d.age : d.disease_duration;
}

std::string bin_label(const std::vector<double>& edges, std::size_t b) {
  const bool last = b + 2 == edges.size();
  return "[" + csv::format_double(edges[b]) + ", " + csv::format_double(edges[b + 1]) + (last ? "]" : ")");
}

struct Member {
  std::size_t group;
  bool positive;
  bool predicted_positive;
};

// Events and denominators for one metric within one group.
std::pair<std::size_t, std::size_t> count_events(const std::vector<Member>& members, std::size_t group,
                                                 BiasMetric metric) {
  std::size_t n = 0, events = 0;
  for (const auto& m : members) {
    if (m.group != group) continue;
    switch (metric) {
      case BiasMetric::Misclassification:
        ++n;
        events += m.positive != m.predicted_positive;
        break;
      case BiasMetric::Underdiagnosis:
        if (!m.positive) break;
        ++n;
        events += !m.predicted_positive;
        break;
      case BiasMetric::Overdiagnosis:
        if (m.positive) break;
        ++n;
        events += m.predicted_positive;
        break;
    }
  }
  return {events, n};
}

}  // namespace

BiasReport build_bias_report(std::span<const int> predicted, std::span<const int> labels,
                             std::span<const Demographics> demographics, const GroupingSpec& grouping) {
  if (predicted.size() != labels.size() || labels.size() != demographics.size())
    throw Error(ErrorCode::LengthMismatch, "predictions, labels and demographics differ in length");
  const std::string& column = grouping.column;
  const bool categorical = column == "cohort" || column == "sex" || column == "ethnicity";
  const bool continuous = column == "age" || column == "disease_duration";
  if (!categorical && !continuous)
    throw Error(ErrorCode::UnknownColumn, "cannot group by '" + column + "'");
  const auto& edges = grouping.bin_edges;
  if (!edges.empty()) {
    if (!continuous) throw Error(ErrorCode::DegenerateParams, "bin edges apply only to age or disease_duration");
    if (edges.size() < 2 || !std::is_sorted(edges.begin(), edges.end()) ||
        std::adjacent_find(edges.begin(), edges.end()) != edges.end())
      throw Error(ErrorCode::DegenerateParams, "bin edges must be at least two strictly increasing values");
  }

  BiasReport report;
  report.column = column;
  report.continuous = continuous;
  report.bin_edges = edges;

  std::vector<std::string> group_names;
  std::vector<Member> members;
  if (categorical) {
    std::map<std::string, std::size_t> index;
    for (const auto& d : demographics)
      if (auto v = categorical_value(d, column)) index.emplace(*v, 0);
    for (auto& [name, i] : index) {
      i = group_names.size();
      group_names.push_back(name);
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const auto v = categorical_value(demographics[r], column);
      if (!v) {
        ++report.rows_excluded;
        continue;
      }
      members.push_back({index.at(*v), labels[r] == 1, predicted[r] == 1});
    }
  } else if (!edges.empty()) {
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) group_names.push_back(bin_label(edges, b));
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const auto v = continuous_value(demographics[r], column);
      if (!v || *v < edges.front() || *v > edges.back()) {
        ++report.rows_excluded;
        continue;
      }
      auto b = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), *v) - edges.begin()) - 1;
      b = std::min(b, edges.size() - 2);
      members.push_back({b, labels[r] == 1, predicted[r] == 1});
    }
  }

  if (continuous) {
    std::vector<double> value, error;
    for (std::size_t r = 0; r < labels.size(); ++r)
      if (auto v = continuous_value(demographics[r], column)) {
        value.push_back(*v);
        error.push_back(labels[r] != predicted[r] ? 1.0 : 0.0);
      }
    if (edges.empty()) report.rows_excluded = labels.size() - value.size();
    try {
      report.spearman = spearman(value, error);
    } catch (const Error& e) {
      report.notes.push_back(std::string("spearman not computed: ") + e.what());
    }
  }
  report.rows_used = labels.size() - report.rows_excluded;

  if (group_names.empty()) {
    if (!continuous) throw Error(ErrorCode::EmptySubgroup, "no row has a value for '" + column + "'");
    return report;
  }
  for (std::size_t g = 0; g < group_names.size(); ++g)
    if (count_events(members, g, BiasMetric::Misclassification).second == 0)
      throw Error(ErrorCode::EmptySubgroup, "subgroup " + group_names[g] + " has no members");

  for (auto metric : {BiasMetric::Misclassification, BiasMetric::Underdiagnosis, BiasMetric::Overdiagnosis}) {
    std::vector<std::pair<std::size_t, std::pair<std::size_t, std::size_t>>> present;
    for (std::size_t g = 0; g < group_names.size(); ++g) {
      const auto [events, n] = count_events(members, g, metric);
      if (n == 0) {
        report.notes.push_back(std::string(to_string(metric)) + ": subgroup " + group_names[g] +
                               " has no eligible members");
        continue;
      }
      report.outcomes.push_back({metric, group_names[g], n, events, normal_approx_ci(events, n)});
      present.push_back({g, {events, n}});
    }
    for (std::size_t i = 0; i < present.size(); ++i)
      for (std::size_t j = i + 1; j < present.size(); ++j) {
        const auto [ea, na] = present[i].second;
        const auto [eb, nb] = present[j].second;
        PairwiseComparison cmp{metric, group_names[present[i].first], group_names[present[j].first], {}};
        const double ra = static_cast<double>(ea) / static_cast<double>(na);
        const double rb = static_cast<double>(eb) / static_cast<double>(nb);
        if (clt_conditions_hold(ra, static_cast<double>(na)) && clt_conditions_hold(rb, static_cast<double>(nb))) {
          cmp.result = z_two_proportions(ea, na, eb, nb);
        } else {
          cmp.result = fisher_exact(ea, na - ea, eb, nb - eb);
          cmp.result.preconditions_met = false;
          cmp.result.notes = "z-test preconditions not met; Fisher exact test used";
        }
        report.comparisons.push_back(std::move(cmp));
      }
  }

  if (continuous && group_names.size() >= 2) {
    std::vector<std::vector<double>> table(group_names.size(), std::vector<double>(2, 0.0));
    for (std::size_t g = 0; g < group_names.size(); ++g) {
      const auto [events, n] = count_events(members, g, BiasMetric::Misclassification);
      table[g] = {static_cast<double>(events), static_cast<double>(n - events)};
    }
    try {
      report.chi_square = chi_square(table);
    } catch (const Error& e) {
      report.notes.push_back(std::string("chi-square not computed: ") + e.what());
    }
  }
  return report;
}

nlohmann::json to_json(const BiasReport& report) {
  nlohmann::json subgroups = nlohmann::json::array();
  for (const auto& o : report.outcomes)
    subgroups.push_back({{"metric", to_string(o.metric)},
                         {"group", o.group},
                         {"n", o.n},
                         {"events", o.event_count},
                         {"rate", o.ci.rate},
                         {"half_width", o.ci.half_width},
                         {"ci_lo", o.ci.lo},
                         {"ci_hi", o.ci.hi},
                         {"preconditions_met", o.ci.preconditions_met}});
  nlohmann::json comparisons = nlohmann::json::array();
  for (const auto& c : report.comparisons)
    comparisons.push_back({{"metric", to_string(c.metric)},
                           {"group_a", c.group_a},
                           {"group_b", c.group_b},
                           {"result", to_json(c.result)}});
  return {{"column", report.column},
          {"continuous", report.continuous},
          {"bin_edges", report.bin_edges},
          {"rows_used", report.rows_used},
          {"rows_excluded", report.rows_excluded},
          {"subgroups", subgroups},
          {"comparisons", comparisons},
          {"spearman", report.spearman ? to_json(*report.spearman) : nlohmann::json(nullptr)},
          {"chi_square", report.chi_square ? to_json(*report.chi_square) : nlohmann::json(nullptr)},
          {"notes", report.notes}};
}

std::string bias_summary_csv(const BiasReport& report) {
  std::string out = "metric,group,n,rate,ci_lo,ci_hi\n";
  for (const auto& o : report.outcomes) {
    out += std::string(to_string(o.metric)) + ',' + csv::quote_if_needed(o.group) + ',' + std::to_string(o.n) +
           ',' + csv::format_double(o.ci.rate) + ',' + csv::format_double(o.ci.lo) + ',' +
           csv::format_double(o.ci.hi) + '\n';
  }
  return out;
}

}  // namespace hyposcreen
