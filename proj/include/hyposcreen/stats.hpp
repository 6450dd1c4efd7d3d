#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hyposcreen/dataset.hpp"

namespace hyposcreen {

// ---------------------------------------------------------------------------
// Distribution functions
// ---------------------------------------------------------------------------

double normal_cdf(double x);
// Two-sided tail probability P(|Z| >= |z|).
double normal_two_sided_p(double z);
// Inverse of normal_cdf on (0, 1).
double normal_quantile(double p);

// Regularized lower incomplete gamma P(a, x) by its power series, and the
// upper Q(a, x) by its continued fraction. Each is accurate on its own side of
// x = a + 1 and in a band around it; far below a + 1 the continued fraction
// loses accuracy. regularized_gamma_q picks the right one.
double regularized_gamma_p_series(double a, double x);
double regularized_gamma_q_continued_fraction(double a, double x);
double regularized_gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double regularized_beta(double a, double b, double x);

double student_t_two_sided_p(double t, double df);
double chi_square_sf(double x, double df);

// ---------------------------------------------------------------------------
// Hypothesis tests
// ---------------------------------------------------------------------------

enum class TestKind { ZTwoProportions, FisherExact, Spearman, ChiSquare };

std::string_view to_string(TestKind kind);

// statistic holds z, the odds ratio, rho or chi-square respectively. The odds
// ratio may be 0 or +inf, and is NaN when both diagonal products are zero.
struct TestResult {
  TestKind test = TestKind::ZTwoProportions;
  double statistic = 0.0;
  double p_value = 1.0;
  bool preconditions_met = true;
  std::string notes;
  double degrees_of_freedom = 0.0;  // chi-square only
};

nlohmann::json to_json(const TestResult& r);

// n p >= 5 and n (1 - p) >= 5.
bool clt_conditions_hold(double rate, double n);

// Counts form: x events out of n in each sample. Preconditions are checked
// per sample with that sample's own proportion; the result is returned with
// preconditions_met = false when they fail. Throws ZeroPooledVariance.
TestResult z_two_proportions(std::size_t x1, std::size_t n1, std::size_t x2, std::size_t n2);
// Same test from rates, for published summaries that give only p and n.
TestResult z_two_proportions_rates(double p1, std::size_t n1, double p2, std::size_t n2);

// Table [[a, b], [c, d]]: rows are the compared groups, columns event and
// non-event. The odds ratio is the second group's odds over the first's,
// (c/d)/(a/b) = bc/ad. Two-sided p sums every table with the same margins
// whose probability does not exceed the observed one. Throws
// DegenerateMargins when a row is empty.
TestResult fisher_exact(std::size_t a, std::size_t b, std::size_t c, std::size_t d);

// Average ranks (ties share the mean of their positions), 1-based.
std::vector<double> average_ranks(std::span<const double> values);

// rho with a t-approximation p for n >= 10 and exact enumeration of all
// permutations below. Throws TooShort, ConstantInput, LengthMismatch.
TestResult spearman(std::span<const double> x, std::span<const double> y);

// Pearson chi-square test of independence on a rows x cols count table.
// Throws ZeroExpectedCell, BadShape.
TestResult chi_square(const std::vector<std::vector<double>>& observed);

struct RateInterval {
  double rate = 0.0;
  double half_width = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool preconditions_met = true;
};

// rate +/- z sqrt(rate (1 - rate) / n). At level 0.95 z is the conventional
// 1.96; other levels use the exact normal quantile. Bounds are left
// untruncated unless asked.
RateInterval normal_approx_ci(std::size_t events, std::size_t n, double level = 0.95, bool truncate = false);

// ---------------------------------------------------------------------------
// Bias report
// ---------------------------------------------------------------------------

enum class BiasMetric { Misclassification, Underdiagnosis, Overdiagnosis };

std::string_view to_string(BiasMetric metric);

struct SubgroupOutcome {
  BiasMetric metric = BiasMetric::Misclassification;
  std::string group;
  std::size_t n = 0;
  std::size_t event_count = 0;
  RateInterval ci;
};

struct PairwiseComparison {
  BiasMetric metric = BiasMetric::Misclassification;
  std::string group_a;
  std::string group_b;
  TestResult result;
};

// Categorical columns: cohort, sex, ethnicity. Continuous columns: age,
// disease_duration; those are grouped only when bin edges are given, as
// [e0, e1), [e1, e2), ..., [e(k-1), ek].
struct GroupingSpec {
  std::string column;
  std::vector<double> bin_edges;
};

struct BiasReport {
  std::string column;
  bool continuous = false;
  std::vector<double> bin_edges;
  std::size_t rows_used = 0;
  std::size_t rows_excluded = 0;  // missing or out-of-range group value
  std::vector<SubgroupOutcome> outcomes;
  std::vector<PairwiseComparison> comparisons;
  std::optional<TestResult> spearman;    // value vs misclassification indicator
  std::optional<TestResult> chi_square;  // binned groups x (error, correct)
  std::vector<std::string> notes;
};

// predicted and labels are 0/1 per row, aligned with demographics. Throws
// UnknownColumn, EmptySubgroup, LengthMismatch.
BiasReport build_bias_report(std::span<const int> predicted, std::span<const int> labels,
                             std::span<const Demographics> demographics, const GroupingSpec& grouping);

nlohmann::json to_json(const BiasReport& report);
// metric,group,n,rate,ci_lo,ci_hi
std::string bias_summary_csv(const BiasReport& report);

}  // namespace hyposcreen
