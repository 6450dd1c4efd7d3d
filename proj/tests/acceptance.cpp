// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "hyposcreen/cli.hpp"
#include "hyposcreen/csv.hpp"
#include "hyposcreen/ensemble.hpp"
#include "hyposcreen/error.hpp"
#include "hyposcreen/evaluate.hpp"
#include "hyposcreen/explain.hpp"
#include "hyposcreen/featurize.hpp"
#include "hyposcreen/metrics.hpp"
#include "hyposcreen/parallel.hpp"
#include "hyposcreen/preprocess.hpp"
#include "hyposcreen/stats.hpp"
#include "hyposcreen/synth.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hyposcreen;
namespace ht = hyposcreen::testing;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int run(std::vector<std::string> args, std::string* stdout_text = nullptr) {
  args.insert(args.begin(), "hyposcreen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (stdout_text) *stdout_text += out.str();
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  set_thread_count(0);
  return code;
}

PipelineConfig light_config() {
  PipelineConfig c;
  c.ensemble.grid.clear();
  for (double lr : {0.1, 0.2}) {
    BoostParams p;
    p.n_trees = 30;
    p.learning_rate = lr;
    p.max_leaves = 7;
    c.ensemble.grid.push_back(p);
  }
  c.ensemble.m = 2;
  c.selection.n = 3;
  c.folds = 3;
  c.bootstrap_seeds = 2;
  return c;
}

BoostedModel small_model(Rng& rng, std::size_t d, std::size_t trees) {
  const auto data = ht::shifted_gaussians(rng, 200, d, std::min<std::size_t>(d, 3), 0.8);
  BoostParams p;
  p.n_trees = trees;
  p.max_leaves = 7 + rng.below(9);
  p.min_samples_leaf = 5;
  p.max_bins = 32;
  return fit_histgbm(data.x, data.y, p, rng.next());
}

// --- 1-3: published statistics checkpoints ---------------------------------------

Outcome ztest_checkpoints() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto a = z_two_proportions_rates(0.141, 361, 0.129, 466);
  const auto b = z_two_proportions_rates(0.194, 103, 0.043, 46);
  const double elapsed = seconds_since(t0);
  o.require(std::abs(a.statistic - 0.52) <= 0.05, "z " + fmt("%.4f", a.statistic) + " vs 0.52");
  o.require(std::abs(a.p_value - 0.60) <= 0.03, "p " + fmt("%.4f", a.p_value) + " vs 0.60");
  o.require(std::abs(b.statistic - 2.40) <= 0.05, "z " + fmt("%.4f", b.statistic) + " vs 2.40");
  o.require(elapsed < 1e-3, "runtime " + fmt("%.3f", elapsed * 1e3) + " ms");
  o.note("z=" + fmt("%.3f", a.statistic) + " p=" + fmt("%.3f", a.p_value) + "; z=" + fmt("%.3f", b.statistic) +
         "; " + fmt("%.3f", elapsed * 1e3) + " ms");
  return o;
}

Outcome fisher_checkpoint() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto r = fisher_exact(15, 55, 0, 7);
  const double elapsed = seconds_since(t0);
  o.require(r.statistic == 0.0, "odds ratio " + fmt("%g", r.statistic));
  o.require(r.p_value >= 0.32 && r.p_value <= 0.35, "p " + fmt("%.4f", r.p_value));
  o.require(elapsed < 1e-2, "runtime " + fmt("%.3f", elapsed * 1e3) + " ms");
  o.note("OR=" + fmt("%g", r.statistic) + " p=" + fmt("%.4f", r.p_value) + "; " + fmt("%.3f", elapsed * 1e3) + " ms");
  return o;
}

Outcome ci_checkpoint() {
  Outcome o;
  // 14.1% of 361 and 12.9% of 466 are 51 and 60 events.
  const auto a = normal_approx_ci(51, 361);
  const auto b = normal_approx_ci(60, 466);
  o.require(std::abs(a.half_width - 0.036) <= 0.0005, "half-width " + fmt("%.5f", a.half_width));
  o.require(std::abs(b.half_width - 0.030) <= 0.0005, "half-width " + fmt("%.5f", b.half_width));
  o.note("+/-" + fmt("%.4f", a.half_width) + ", +/-" + fmt("%.4f", b.half_width));
  return o;
}

// --- 4: synthetic end to end -------------------------------------------------------

double cv_auroc(const std::filesystem::path& dir, const std::string& delta, std::uint64_t seed) {
  const auto sim = (dir / ("sim_" + std::to_string(seed) + ".csv")).string();
  const auto report = (dir / ("cv_" + std::to_string(seed) + ".json")).string();
  if (run({"simulate", "--n", "1000", "--delta", delta, "--dims", "1", "--seed", std::to_string(seed), "--out", sim}))
    throw Error(ErrorCode::InternalError, "simulate failed");
  if (run({"--threads", "4", "cv", "--features", sim, "--folds", "10", "--seeds", "1", "--out", report}))
    throw Error(ErrorCode::InternalError, "cv failed");
  return cv_report_from_json(json::parse(csv::read_text(report))).pooled.roc.auroc;
}

Outcome synthetic_end_to_end() {
  Outcome o;
  ht::TempDir dir;
  const auto t0 = Clock::now();
  const double bayes = normal_cdf(std::sqrt(2.0));
  const double signal = cv_auroc(dir.path(), "2", 42);
  o.require(std::abs(signal - bayes) <= 0.03, "auroc " + fmt("%.4f", signal) + " vs " + fmt("%.4f", bayes));
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const double a = cv_auroc(dir.path(), "0", seed);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    o.require(a >= 0.42 && a <= 0.58, "null seed " + std::to_string(seed) + " auroc " + fmt("%.4f", a));
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed <= 60.0, "runtime " + fmt("%.1f", elapsed) + " s with 4 workers on " +
                                 std::to_string(std::thread::hardware_concurrency()) + " hardware thread(s)");
  o.note("auroc " + fmt("%.4f", signal) + " (bayes " + fmt("%.4f", bayes) + "); null range [" + fmt("%.4f", lo) +
         ", " + fmt("%.4f", hi) + "] over 20 seeds; " + fmt("%.1f", elapsed) + " s");
  return o;
}

// --- 5: oracle equivalences ----------------------------------------------------------

Outcome oracle_equivalences() {
  Outcome o;
  Rng rng(20250501);
  constexpr int kInstances = 100;

  double roc_err = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t n = 2 + rng.below(200);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.normal() * 4.0) / 4.0;  // plenty of ties
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    roc_err = std::max(roc_err, std::abs(roc_auroc(s, y).auroc - ht::mann_whitney(s, y)));
  }
  o.require(roc_err <= 1e-12, "auroc vs Mann-Whitney " + fmt("%.3g", roc_err));

  double shap_err = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t d = 2 + rng.below(9);
    const auto m = small_model(rng, d, 3 + rng.below(8));
    std::vector<double> row(d);
    for (auto& v : row) v = 1.5 * rng.normal();
    const auto fast = tree_shap(m, row);
    const auto exact = exact_shapley_oracle(m, row);
    for (std::size_t i = 0; i < d; ++i) shap_err = std::max(shap_err, std::abs(fast.values[i] - exact.values[i]));
  }
  o.require(shap_err <= 1e-9, "TreeSHAP vs coalition Shapley " + fmt("%.3g", shap_err));

  double fisher_err = 0.0;
  int fisher_tables = 0;
  while (fisher_tables < 3 * kInstances) {
    const std::size_t a = rng.below(9), b = rng.below(9), c = rng.below(9), d = rng.below(9);
    if (a + b == 0 || c + d == 0 || a + b + c + d > 30) continue;
    fisher_err = std::max(fisher_err, std::abs(fisher_exact(a, b, c, d).p_value - ht::fisher_permutation_oracle(a, b, c, d)));
    ++fisher_tables;
  }
  o.require(fisher_err <= 1e-10, "Fisher vs enumeration " + fmt("%.3g", fisher_err));

  bool smote_ok = true;
  double smote_err = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t m = 3 + rng.below(25), d = 1 + rng.below(6), k = 1 + rng.below(6);
    const auto minority = ht::random_matrix(rng, m, d);
    const auto knn = ht::brute_force_knn(minority, std::min(k, m - 1));
    const auto r = smote_oversample(minority, m + 1 + rng.below(40), k, rng.next());
    for (std::size_t s = 0; s < r.synthetic.rows(); ++s) {
      const auto i = r.seed_row[s], j = r.neighbor_row[s];
      smote_ok = smote_ok && knn[i].count(j) && r.gap[s] >= 0.0 && r.gap[s] < 1.0;
      for (std::size_t c = 0; c < d; ++c)
        smote_err = std::max(smote_err,
                             std::abs(r.synthetic(s, c) - (minority(i, c) + r.gap[s] * (minority(j, c) - minority(i, c)))));
    }
  }
  o.require(smote_ok && smote_err <= 1e-14, "SMOTE segments");

  double walk_err = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t d = 1 + rng.below(8);
    const auto m = small_model(rng, d, 5 + rng.below(20));
    const auto probe = ht::gaussian_matrix(rng, 20, d);
    const auto p = predict_proba(m, probe);
    for (std::size_t r = 0; r < probe.rows(); ++r)
      walk_err = std::max(walk_err, std::abs(p[r] - sigmoid(ht::naive_raw(m, probe.row(r)))));
  }
  o.require(walk_err <= 1e-12, "prediction vs tree walk " + fmt("%.3g", walk_err));

  double pca_err = 0.0;
  for (int t = 0; t < kInstances; ++t) {
    const std::size_t d = 2 + rng.below(9), n = 20 + rng.below(100);
    const auto g = ht::gaussian_matrix(rng, n, d);
    const auto mix = ht::gaussian_matrix(rng, d, d);
    Matrix x(n, d);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = 0; k < d; ++k) x(r, j) += g(r, k) * mix(k, j);
    const auto p = pca_project(x);
    const auto c = ht::correlation(x);
    const auto eig = ht::jacobi(c, d);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto v = p.components.row(k);
      double rq = 0.0;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) rq += v[i] * c[i * d + j] * v[j];
      pca_err = std::max(pca_err, std::abs(rq - eig.values[k]));
      pca_err = std::max(pca_err, std::abs(p.explained[k] * d - eig.values[k]));
    }
  }
  o.require(pca_err <= 1e-8, "PCA vs Jacobi " + fmt("%.3g", pca_err));

  o.note("max errors: roc " + fmt("%.1e", roc_err) + ", shap " + fmt("%.1e", shap_err) + ", fisher " +
         fmt("%.1e", fisher_err) + ", smote " + fmt("%.1e", smote_err) + ", walk " + fmt("%.1e", walk_err) +
         ", pca " + fmt("%.1e", pca_err) + " (>= 100 instances each)");
  return o;
}

// --- 6: numerical checks ---------------------------------------------------------------

Outcome numerical_checks() {
  Outcome o;
  Rng rng(20250502);

  double grad_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const auto x = ht::gaussian_matrix(rng, 30, 5);
    const auto y = ht::random_labels(rng, 30);
    std::vector<double> w(5);
    for (auto& v : w) v = rng.normal();
    const double b = rng.normal(), l2 = 2.0 * rng.uniform(), h = 1e-6;
    const auto g = logistic_gradient(x, y, l2, w, b);
    for (std::size_t j = 0; j < 6; ++j) {
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (j < 5) wp[j] += h, wm[j] -= h;
      else bp += h, bm -= h;
      const double fd = (logistic_objective(x, y, l2, wp, bp) - logistic_objective(x, y, l2, wm, bm)) / (2.0 * h);
      grad_err = std::max(grad_err, std::abs(fd - g[j]) / std::max(1.0, std::abs(g[j])));
    }
  }
  o.require(grad_err < 1e-5, "logistic gradient " + fmt("%.3g", grad_err));

  double worst_rise = 0.0;
  for (int t = 0; t < 50; ++t) {
    const auto m = small_model(rng, 1 + rng.below(8), 40);
    for (std::size_t i = 1; i < m.train_loss.size(); ++i)
      worst_rise = std::max(worst_rise, m.train_loss[i] - m.train_loss[i - 1]);
  }
  o.require(worst_rise <= 1e-9, "training loss rose by " + fmt("%.3g", worst_rise));

  // Every attribution the pipeline can emit: all rows under every base model.
  const auto data = generate_synthetic_dataset({150, 1.0, 6, 3, 17, 0.0});
  const auto config = light_config();
  const auto model = fit_pipeline(data.features, data.feature_names, data.labels, config, 5);
  const auto cols = column_indices(data.feature_names, model.selected_features);
  const auto scaled = apply_scaler(model.scaler, data.features.select_cols(cols), model.selected_features);
  double local_err = 0.0;
  std::size_t emitted = 0;
  for (const auto& base : model.base)
    for (std::size_t r = 0; r < scaled.rows(); ++r) {
      const auto a = tree_shap(base.model, scaled.row(r), r);
      double total = a.base_value;
      for (double v : a.values) total += v;
      local_err = std::max(local_err, std::abs(total - base.model.raw_score(scaled.row(r))));
      ++emitted;
    }
  o.require(local_err < 1e-9, "SHAP local accuracy " + fmt("%.3g", local_err));
  o.note("gradient rel err " + fmt("%.1e", grad_err) + ", worst loss rise " + fmt("%.1e", worst_rise) +
         ", local accuracy " + fmt("%.1e", local_err) + " over " + std::to_string(emitted) + " attributions");
  return o;
}

// --- 7: structure --------------------------------------------------------------------------

Outcome structural_checks() {
  Outcome o;
  ht::TempDir dir;
  const auto manifest = parse_manifest(ht::write_cohort(dir.path(), 6, 77));
  FeaturizeOptions all;
  o.require(featurize_manifest(manifest, all).dataset.feature_count() == 126, "126 features for three expressions");
  for (auto e : kAllExpressions) {
    FeaturizeOptions one;
    one.expressions = {e};
    o.require(featurize_manifest(manifest, one).dataset.feature_count() == 42, "42 features for one expression");
  }

  std::vector<int> y(100, 0);
  for (int i = 0; i < 10; ++i) y[i * 7] = 1;
  const auto plan = stratified_kfold(y, 10, 42);
  for (std::size_t f = 0; f < 10; ++f) {
    int pos = 0, neg = 0;
    for (auto i : plan.test_indices(f)) (y[i] ? pos : neg)++;
    o.require(pos == 1 && neg == 9, "fold " + std::to_string(f) + " holds " + std::to_string(pos) + "/" +
                                         std::to_string(neg));
  }

  // Imbalanced cohorts so SMOTE has work to do in every fold.
  std::size_t violations = 0, synthetic_fitted = 0, overlaps = 0;
  const auto config = light_config();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto full = generate_synthetic_dataset({60, 1.0, 4, 2, 1000 + seed, 0.0});
    std::vector<std::size_t> keep;
    for (std::size_t r = 0; r < full.size(); ++r)
      if (full.labels[r] == 0 || r % 4 == 0) keep.push_back(r);
    const auto data = full.subset(keep);
    const auto cv = run_cross_validation(data, config, 5, seed);
    violations += audit_leakage_violations(cv.audit);
    std::map<std::size_t, std::set<std::string>> fitted;
    for (const auto& e : cv.audit) {
      if (e.at("event") == "fit") {
        for (const auto& r : e.at("rows")) fitted[e.at("fold").get<std::size_t>()].insert(r.get<std::string>());
        synthetic_fitted += e.value("synthetic_rows", std::size_t{0});
      }
    }
    for (const auto& e : cv.audit) {
      if (e.at("event") != "evaluate") continue;
      if (e.at("synthetic_rows").get<std::size_t>() != 0) ++overlaps;
      for (const auto& r : e.at("rows")) overlaps += fitted[e.at("fold").get<std::size_t>()].count(r.get<std::string>());
    }
  }
  o.require(violations == 0 && overlaps == 0, "leakage: " + std::to_string(violations) + " audited, " +
                                                  std::to_string(overlaps) + " recounted");
  o.require(synthetic_fitted > 0, "no synthetic rows reached any fit, so the audit was vacuous");
  o.note("126/42 features, 1+9 folds, 0 leaks over 50 runs (" + std::to_string(synthetic_fitted) +
         " synthetic rows confined to training)");
  return o;
}

// --- 8: determinism ---------------------------------------------------------------------------

std::map<std::string, std::string> directory_contents(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      out[std::filesystem::relative(entry.path(), dir).string()] = csv::read_text(entry.path());
  return out;
}

bool run_every_subcommand(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                          const std::string& threads, std::string& log) {
  const auto o = [&](const char* name) { return (out_dir / name).string(); };
  const auto in = [&](const char* name) { return (in_dir / name).string(); };
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "--n", "200", "--dims", "4", "--seed", "5", "--subgroup-effect", "0.5", "--out", o("sim.csv")},
      {"featurize", "--manifest", in("manifest.json"), "--out", o("feat.csv")},
      {"train", "--features", o("sim.csv"), "--config", in("config.json"), "--out", o("model.json")},
      {"cv", "--features", o("sim.csv"), "--config", in("config.json"), "--out", o("cv.json"), "--preds-out",
       o("oof.csv")},
      {"predict", "--model", o("model.json"), "--features", o("sim.csv"), "--out", o("preds.csv")},
      {"bias", "--preds", o("oof.csv"), "--features", o("sim.csv"), "--group", "sex", "--out", o("bias.json")},
      {"explain", "--model", o("model.json"), "--features", o("sim.csv"), "--out", o("shap.csv")},
      {"project", "--features", o("feat.csv"), "--out", o("pca.csv")},
      {"sweep", "--grid", in("grid.json"), "--features", o("sim.csv"), "--out", o("leaderboard.csv")},
  };
  bool ok = true;
  for (auto args : commands) {
    args.insert(args.begin(), {"--threads", threads});
    ok = run(args, &log) == 0 && ok;
  }
  return ok;
}

Outcome determinism() {
  Outcome o;
  ht::TempDir dir;
  const auto inputs = dir / "inputs";
  std::filesystem::create_directories(inputs);
  ht::write_cohort(inputs, 30, 11);
  csv::write_text(inputs / "config.json", to_json(light_config()).dump(2));
  const json grid{{"base", to_json(light_config())},
                  {"axes", {{"smote.enabled", {true, false}}, {"selection.n", {2, 4}}}}};
  csv::write_text(inputs / "grid.json", grid.dump());

  std::string log_a, log_b, log_c;
  o.require(run_every_subcommand(inputs, dir / "a", "1", log_a), "a subcommand failed");
  o.require(run_every_subcommand(inputs, dir / "b", "1", log_b), "a subcommand failed");
  o.require(run_every_subcommand(inputs, dir / "c", "4", log_c), "a subcommand failed");
  const auto a = directory_contents(dir / "a");
  o.require(a == directory_contents(dir / "b") && log_a == log_b, "repeat run differs");
  o.require(a == directory_contents(dir / "c") && log_a == log_c, "1 vs 4 workers differ");
  o.note(std::to_string(a.size()) + " output files from 9 subcommands identical across repeat and 1 vs 4 workers");
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"z-test checkpoint", ztest_checkpoints},
      {"Fisher checkpoint", fisher_checkpoint},
      {"CI half-width checkpoint", ci_checkpoint},
      {"synthetic end to end", synthetic_end_to_end},
      {"oracle equivalences", oracle_equivalences},
      {"numerical checks", numerical_checks},
      {"structural checks", structural_checks},
      {"determinism", determinism},
  };
  int failures = 0;
  int id = 0;
  for (const auto& [name, check] : criteria) {
    ++id;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(t0);
    failures += !o.pass;
    std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), elapsed);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
