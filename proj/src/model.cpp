#include "hyposcreen/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include "hyposcreen/error.hpp"
#include "hyposcreen/kernels.hpp"
#include "hyposcreen/rng.hpp"

namespace hyposcreen {

using nlohmann::json;

void require_both_classes(std::span<const int> labels) {
  bool pos = false, neg = false;
  for (int y : labels) (y == 1 ? pos : neg) = true;
  if (!pos || !neg) throw Error(ErrorCode::SingleClass, "labels contain a single class");
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

namespace {

// Unclamped logistic, consistent with softplus' derivative.
double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_shape(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::LengthMismatch, "row count differs from label count");
  if (x.rows() == 0) throw Error(ErrorCode::EmptyMatrix, "no training rows");
}

// In-place Cholesky solve of a symmetric positive definite system. Returns
// false when the matrix is not numerically positive definite.
bool cholesky_solve(std::vector<double> a, std::size_t n, std::vector<double>& rhs) {
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) diag -= a[j * n + k] * a[j * n + k];
    if (!(diag > 0.0)) return false;
    const double ljj = std::sqrt(diag);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = v / ljj;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = rhs[i];
    for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * rhs[k];
    rhs[i] = v / a[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {
    double v = rhs[ii];
    for (std::size_t k = ii + 1; k < n; ++k) v -= a[k * n + ii] * rhs[k];
    rhs[ii] = v / a[ii * n + ii];
  }
  return true;
}

}  // namespace

double LogisticModel::raw_score(std::span<const double> row) const {
  if (row.size() != weights.size())
    throw Error(ErrorCode::WidthMismatch, "row has " + std::to_string(row.size()) + " values, model expects " +
                                              std::to_string(weights.size()));
  return kernels::dot(row, weights) + intercept;
}

double logistic_objective(const Matrix& x, std::span<const int> y, double l2,
                          std::span<const double> weights, double intercept) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double z = kernels::dot(x.row(i), weights) + intercept;
    total += softplus(z) - static_cast<double>(y[i]) * z;
  }
  return total + 0.5 * l2 * kernels::dot(weights, weights);
}

std::vector<double> logistic_gradient(const Matrix& x, std::span<const int> y, double l2,
                                      std::span<const double> weights, double intercept) {
  const std::size_t d = x.cols();
  std::vector<double> grad(d + 1, 0.0);
  std::span<double> gw(grad.data(), d);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double residual = logistic(kernels::dot(x.row(i), weights) + intercept) - y[i];
    kernels::axpy(residual, x.row(i), gw);
    grad[d] += residual;
  }
  kernels::axpy(l2, weights, gw);
  return grad;
}

LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, double l2_strength, double tol,
                           std::size_t max_iter) {
  check_shape(x, y);
  require_both_classes(y);
  if (l2_strength < 0.0) throw Error(ErrorCode::DegenerateParams, "l2_strength must be >= 0");

  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t p = d + 1;
  LogisticModel model;
  model.weights.assign(d, 0.0);
  model.l2_strength = l2_strength;

  double objective = logistic_objective(x, y, l2_strength, model.weights, model.intercept);
  std::vector<double> hessian(p * p);
  std::vector<double> xi(p);
  std::vector<double> trial_w(d);

  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const auto grad = logistic_gradient(x, y, l2_strength, model.weights, model.intercept);
    double norm = 0.0;
    for (double g : grad) norm = std::max(norm, std::abs(g));
    model.iterations = iter;
    if (norm < tol) {
      model.converged = true;
      return model;
    }

    std::fill(hessian.begin(), hessian.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double pi = logistic(kernels::dot(x.row(i), model.weights) + model.intercept);
      const double s = pi * (1.0 - pi);
      if (s == 0.0) continue;
      std::copy(x.row(i).begin(), x.row(i).end(), xi.begin());
      xi[d] = 1.0;
      for (std::size_t a = 0; a < p; ++a)
        kernels::axpy(s * xi[a], xi, std::span(hessian.data() + a * p, p));
    }
    for (std::size_t a = 0; a < d; ++a) hessian[a * p + a] += l2_strength;

    std::vector<double> step = grad;
    double jitter = 1e-10;
    auto attempt = hessian;
    while (!cholesky_solve(attempt, p, step)) {
      step = grad;
      attempt = hessian;
      for (std::size_t a = 0; a < p; ++a) attempt[a * p + a] += jitter;
      jitter *= 10.0;
      if (jitter > 1e6) break;
    }

    // slope is the squared Newton decrement. Once it falls below the rounding
    // level of the objective the line search can no longer see progress, so
    // take the full Newton step and stop.
    const double slope = std::inner_product(grad.begin(), grad.end(), step.begin(), 0.0);
    if (slope <= 1e-15 * std::max(1.0, std::abs(objective))) {
      for (std::size_t a = 0; a < d; ++a) model.weights[a] -= step[a];
      model.intercept -= step[d];
      model.iterations = iter + 1;
      model.converged = true;
      return model;
    }
    double t = 1.0;
    bool accepted = false;
    while (t > 1e-12) {
      for (std::size_t a = 0; a < d; ++a) trial_w[a] = model.weights[a] - t * step[a];
      const double trial_b = model.intercept - t * step[d];
      const double trial = logistic_objective(x, y, l2_strength, trial_w, trial_b);
      if (trial <= objective - 1e-4 * t * slope) {
        model.weights = trial_w;
        model.intercept = trial_b;
        objective = trial;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      model.iterations = iter + 1;
      return model;
    }
  }

  const auto grad = logistic_gradient(x, y, l2_strength, model.weights, model.intercept);
  double norm = 0.0;
  for (double g : grad) norm = std::max(norm, std::abs(g));
  model.converged = norm < tol;
  model.iterations = max_iter;
  return model;
}

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

std::uint8_t BinMapper::bin(std::size_t feature, double value) const {
  const auto& t = thresholds[feature];
  return static_cast<std::uint8_t>(std::lower_bound(t.begin(), t.end(), value) - t.begin());
}

void BinMapper::bin_row(std::span<const double> row, std::uint8_t* out) const {
  for (std::size_t f = 0; f < thresholds.size(); ++f) out[f] = bin(f, row[f]);
}

std::vector<std::uint8_t> BinMapper::transform(const Matrix& x) const {
  if (x.cols() != thresholds.size())
    throw Error(ErrorCode::WidthMismatch, "matrix width differs from bin mapper width");
  const std::size_t n = x.rows();
  std::vector<std::uint8_t> out(n * x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f)
    for (std::size_t r = 0; r < n; ++r) out[f * n + r] = bin(f, x(r, f));
  return out;
}

BinMapper quantile_bin(const Matrix& x, std::size_t max_bins) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyMatrix, "cannot bin zero rows");
  if (max_bins < 2 || max_bins > kMaxBins)
    throw Error(ErrorCode::DegenerateParams, "max_bins must lie in [2, 255]");

  BinMapper mapper;
  mapper.thresholds.resize(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto col = x.column(f);
    std::sort(col.begin(), col.end());
    std::vector<double> distinct = col;
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    auto& t = mapper.thresholds[f];
    if (distinct.size() <= max_bins) {
      for (std::size_t i = 0; i + 1 < distinct.size(); ++i) t.push_back(0.5 * (distinct[i] + distinct[i + 1]));
    } else {
      const double last = static_cast<double>(col.size() - 1);
      for (std::size_t q = 1; q < max_bins; ++q) {
        const double h = last * static_cast<double>(q) / static_cast<double>(max_bins);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = static_cast<std::size_t>(std::ceil(h));
        const double cut = 0.5 * (col[lo] + col[hi]);
        if (t.empty() || cut > t.back()) t.push_back(cut);
      }
    }
  }
  return mapper;
}

// ---------------------------------------------------------------------------
// Boosting
// ---------------------------------------------------------------------------

json to_json(const BoostParams& p) {
  return json{{"n_trees", p.n_trees},
              {"learning_rate", p.learning_rate},
              {"max_leaves", p.max_leaves},
              {"max_depth", p.max_depth},
              {"min_samples_leaf", p.min_samples_leaf},
              {"l2_leaf", p.l2_leaf},
              {"max_bins", p.max_bins},
              {"feature_fraction", p.feature_fraction},
              {"early_stopping_rounds", p.early_stopping_rounds},
              {"validation_fraction", p.validation_fraction}};
}

BoostParams boost_params_from_json(const json& j) {
  BoostParams p;
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "booster params must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw Error(ErrorCode::SchemaViolation, "field '" + key + "' must be numeric");
    if (key == "n_trees") p.n_trees = value.get<std::size_t>();
    else if (key == "learning_rate") p.learning_rate = value.get<double>();
    else if (key == "max_leaves") p.max_leaves = value.get<std::size_t>();
    else if (key == "max_depth") p.max_depth = value.get<std::size_t>();
    else if (key == "min_samples_leaf") p.min_samples_leaf = value.get<std::size_t>();
    else if (key == "l2_leaf") p.l2_leaf = value.get<double>();
    else if (key == "max_bins") p.max_bins = value.get<std::size_t>();
    else if (key == "feature_fraction") p.feature_fraction = value.get<double>();
    else if (key == "early_stopping_rounds") p.early_stopping_rounds = value.get<std::size_t>();
    else if (key == "validation_fraction") p.validation_fraction = value.get<double>();
    else throw Error(ErrorCode::SchemaViolation, "unknown booster parameter '" + key + "'");
  }
  return p;
}

std::size_t Tree::leaf_for(const BinMapper& bins, std::span<const double> row) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const auto& n = nodes[node];
    const auto f = static_cast<std::size_t>(n.feature);
    node = static_cast<std::size_t>(bins.bin(f, row[f]) <= n.bin_threshold ? n.left : n.right);
  }
  return node;
}

std::size_t Tree::leaf_for_binned(const std::uint8_t* row_bins) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(row_bins[n.feature] <= n.bin_threshold ? n.left : n.right);
  }
  return node;
}

double BoostedModel::raw_score(std::span<const double> row) const {
  if (row.size() != feature_count)
    throw Error(ErrorCode::WidthMismatch, "row has " + std::to_string(row.size()) +
                                              " values, model expects " + std::to_string(feature_count));
  std::uint8_t stack_bins[256];
  std::vector<std::uint8_t> heap_bins;
  std::uint8_t* row_bins = stack_bins;
  if (feature_count > 256) {
    heap_bins.resize(feature_count);
    row_bins = heap_bins.data();
  }
  bin_mapper.bin_row(row, row_bins);
  double sum = 0.0;
  for (const auto& tree : trees) sum += tree.nodes[tree.leaf_for_binned(row_bins)].value;
  return base_score + learning_rate * sum;
}

std::vector<HistBin> build_histogram(std::span<const std::uint8_t> feature_bins,
                                     std::span<const std::uint32_t> rows,
                                     std::span<const double> grad, std::span<const double> hess,
                                     std::size_t n_bins) {
  std::vector<HistBin> hist(n_bins);
  for (std::uint32_t r : rows) {
    auto& b = hist[feature_bins[r]];
    b.grad += grad[r];
    b.hess += hess[r];
    ++b.count;
  }
  return hist;
}

std::vector<HistBin> subtract_histogram(std::span<const HistBin> parent,
                                        std::span<const HistBin> child) {
  std::vector<HistBin> out(parent.size());
  for (std::size_t b = 0; b < parent.size(); ++b) {
    out[b].grad = parent[b].grad - child[b].grad;
    out[b].hess = parent[b].hess - child[b].hess;
    out[b].count = parent[b].count - child[b].count;
  }
  return out;
}

namespace {

void validate(const BoostParams& p) {
  auto bad = [](const char* what) { throw Error(ErrorCode::DegenerateParams, what); };
  if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) bad("learning_rate must lie in (0, 1]");
  if (p.max_leaves < 2) bad("max_leaves must be >= 2");
  if (p.min_samples_leaf < 1) bad("min_samples_leaf must be >= 1");
  if (!(p.l2_leaf >= 0.0)) bad("l2_leaf must be >= 0");
  if (p.max_bins < 2 || p.max_bins > kMaxBins) bad("max_bins must lie in [2, 255]");
  if (!(p.feature_fraction > 0.0 && p.feature_fraction <= 1.0)) bad("feature_fraction must lie in (0, 1]");
  if (p.early_stopping_rounds > 0 && !(p.validation_fraction > 0.0 && p.validation_fraction < 1.0))
    bad("validation_fraction must lie in (0, 1)");
}

// Training rows with identical bin vectors always land in the same leaves, so
// boosting runs on groups of such rows weighted by their size. On wide data
// every group is a single row; on low-dimensional data this shrinks the work
// several-fold without changing the model beyond floating-point rounding.
struct RowGroups {
  std::size_t count = 0;
  std::vector<std::uint8_t> bins;    // feature-major: bins[f * count + g]
  std::vector<double> size;          // rows per group
  std::vector<double> positives;     // label-1 rows per group
};

RowGroups group_rows(std::span<const std::uint8_t> binned, std::size_t n_rows, std::size_t d,
                     std::span<const std::uint32_t> train_rows, std::span<const int> y) {
  std::vector<std::uint32_t> order(train_rows.begin(), train_rows.end());
  auto key_less = [&](std::uint32_t a, std::uint32_t b) {
    for (std::size_t f = 0; f < d; ++f) {
      const auto ba = binned[f * n_rows + a], bb = binned[f * n_rows + b];
      if (ba != bb) return ba < bb;
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), key_less);

  RowGroups g;
  std::vector<std::uint32_t> first;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::uint32_t r = order[i];
    if (i == 0 || key_less(order[i - 1], r)) {
      first.push_back(r);
      g.size.push_back(0.0);
      g.positives.push_back(0.0);
    }
    g.size.back() += 1.0;
    g.positives.back() += y[r];
  }
  g.count = first.size();
  g.bins.resize(g.count * d);
  for (std::size_t f = 0; f < d; ++f)
    for (std::size_t k = 0; k < g.count; ++k) g.bins[f * g.count + k] = binned[f * n_rows + first[k]];
  return g;
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  std::uint8_t bin = 0;
  double grad_left = 0.0;
  double hess_left = 0.0;
};

// A leaf under construction owns positions [begin, end) of every per-feature
// unit list.
struct GrowingLeaf {
  int node = 0;
  std::size_t depth = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double rows = 0.0;
  double positives = 0.0;
  double grad = 0.0;
  double hess = 0.0;
  SplitCandidate best;
};

// Grows the trees of one boosting run over row groups. For every feature the
// grower keeps the groups ordered by bin, and splits partition each list
// stably, so a node's split search is a single pass over its own groups with
// no per-bin work. Summing per bin in this order gives the same bin totals a
// histogram would.
class TreeGrower {
 public:
  TreeGrower(const BoostParams& params, const BinMapper& bins, const RowGroups& groups)
      : params_(params), bins_(bins), groups_(groups), n_(groups.count) {
    const std::size_t d = bins.feature_count();
    order_.resize(d * n_);
    work_.resize(d * n_);
    work_bins_.resize(d * n_);
    scratch_.resize(n_);
    scratch_bins_.resize(n_);
    goes_left_.resize(n_);
    std::vector<std::size_t> start(kMaxBins + 2);
    for (std::size_t f = 0; f < d; ++f) {
      const std::uint8_t* column = groups.bins.data() + f * n_;
      std::fill(start.begin(), start.end(), 0);
      for (std::size_t u = 0; u < n_; ++u) ++start[column[u] + 1u];
      for (std::size_t b = 1; b < start.size(); ++b) start[b] += start[b - 1];
      for (std::size_t u = 0; u < n_; ++u) order_[f * n_ + start[column[u]]++] = static_cast<std::uint32_t>(u);
    }
  }

  struct LeafRange {
    int node;
    std::size_t begin;
    std::size_t end;
  };

  // Afterwards each leaf owns units()[begin, end).
  Tree grow(std::span<const double> grad, std::span<const double> hess, std::vector<std::size_t> active,
            std::vector<LeafRange>& leaf_ranges) {
    grad_ = grad;
    hess_ = hess;
    active_ = std::move(active);
    for (std::size_t f : active_) {
      const std::uint8_t* column = groups_.bins.data() + f * n_;
      for (std::size_t i = f * n_; i < (f + 1) * n_; ++i) {
        work_[i] = order_[i];
        work_bins_[i] = column[order_[i]];
      }
    }

    Tree tree;
    tree.nodes.emplace_back();
    GrowingLeaf root;
    root.end = n_;
    for (std::size_t u = 0; u < n_; ++u) {
      root.rows += groups_.size[u];
      root.positives += groups_.positives[u];
      root.grad += grad_[u];
      root.hess += hess_[u];
    }
    tree.nodes[0].cover = root.rows;
    if (splittable(root)) evaluate(root);

    std::vector<GrowingLeaf> leaves{root};
    while (leaves.size() < params_.max_leaves) {
      std::size_t pick = leaves.size();
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].best.feature < 0) continue;
        if (pick == leaves.size() || leaves[i].best.gain > leaves[pick].best.gain ||
            (leaves[i].best.gain == leaves[pick].best.gain && leaves[i].node < leaves[pick].node))
          pick = i;
      }
      if (pick == leaves.size()) break;
      const GrowingLeaf parent = leaves[pick];
      leaves.erase(leaves.begin() + static_cast<std::ptrdiff_t>(pick));
      auto [left, right] = split(tree, parent);
      leaves.push_back(left);
      leaves.push_back(right);
    }

    leaf_ranges.clear();
    for (const auto& leaf : leaves) {
      tree.nodes[static_cast<std::size_t>(leaf.node)].value = -leaf.grad / (leaf.hess + params_.l2_leaf);
      leaf_ranges.push_back({leaf.node, leaf.begin, leaf.end});
    }
    return tree;
  }

  std::span<const std::uint32_t> units() const {
    return {work_.data() + active_.front() * n_, n_};
  }

 private:
  bool splittable(const GrowingLeaf& leaf) const {
    if (params_.max_depth > 0 && leaf.depth >= params_.max_depth) return false;
    if (leaf.rows < 2.0 * static_cast<double>(params_.min_samples_leaf)) return false;
    return leaf.positives != 0.0 && leaf.positives != leaf.rows;
  }

  // The parent term of the gain is the same for every candidate, so the scan
  // compares only the child terms and the gain is formed once at the end.
  void evaluate(GrowingLeaf& leaf) const {
    leaf.best = {};
    const double l2 = params_.l2_leaf;
    const auto min_leaf = static_cast<double>(params_.min_samples_leaf);
    const double parent_term = leaf.grad * leaf.grad / (leaf.hess + l2);
    double best_children = parent_term;
    for (std::size_t f : active_) {
      const std::uint32_t* list = work_.data() + f * n_;
      const std::uint8_t* list_bins = work_bins_.data() + f * n_;
      double gl = 0.0, hl = 0.0, nl = 0.0;
      for (std::size_t i = leaf.begin; i + 1 < leaf.end; ++i) {
        const std::uint32_t u = list[i];
        gl += grad_[u];
        hl += hess_[u];
        nl += groups_.size[u];
        if (list_bins[i + 1] == list_bins[i] || nl < min_leaf) continue;
        if (leaf.rows - nl < min_leaf) break;
        // gl^2/dl + gr^2/dr > best, multiplied through by the positive dl*dr.
        const double gr = leaf.grad - gl;
        const double dl = hl + l2, dr = leaf.hess - hl + l2;
        if (gl * gl * dr + gr * gr * dl > best_children * dl * dr) {
          best_children = gl * gl / dl + gr * gr / dr;
          leaf.best = {0.0, static_cast<int>(f), list_bins[i], gl, hl};
        }
      }
    }
    if (leaf.best.feature < 0) return;
    leaf.best.gain = split_gain(leaf.best.grad_left, leaf.best.hess_left, leaf.grad - leaf.best.grad_left,
                                leaf.hess - leaf.best.hess_left, l2);
    if (!(leaf.best.gain > 0.0)) leaf.best = {};
  }

  std::pair<GrowingLeaf, GrowingLeaf> split(Tree& tree, const GrowingLeaf& parent) {
    const auto feature = static_cast<std::size_t>(parent.best.feature);
    const std::uint8_t threshold_bin = parent.best.bin;

    // The split feature's own list is sorted by bin, so its left part is a
    // prefix; only the other lists need partitioning.
    GrowingLeaf left, right;
    const std::uint32_t* split_list = work_.data() + feature * n_;
    const std::uint8_t* split_bins = work_bins_.data() + feature * n_;
    const std::size_t mid = static_cast<std::size_t>(
        std::upper_bound(split_bins + parent.begin, split_bins + parent.end, threshold_bin) - split_bins);
    const std::size_t n_left = mid - parent.begin;
    for (std::size_t i = parent.begin; i < mid; ++i) {
      left.rows += groups_.size[split_list[i]];
      left.positives += groups_.positives[split_list[i]];
    }
    if (active_.size() > 1) {
      for (std::size_t i = parent.begin; i < parent.end; ++i) goes_left_[split_list[i]] = i < mid;
    }
    for (std::size_t f : active_) {
      if (f == feature) continue;
      std::uint32_t* list = work_.data() + f * n_;
      std::uint8_t* list_bins = work_bins_.data() + f * n_;
      std::size_t l = parent.begin, r = 0;
      for (std::size_t i = parent.begin; i < parent.end; ++i) {
        const std::uint32_t u = list[i];
        const std::uint8_t b = list_bins[i];
        if (goes_left_[u]) {
          list[l] = u;
          list_bins[l++] = b;
        } else {
          scratch_[r] = u;
          scratch_bins_[r++] = b;
        }
      }
      std::copy_n(scratch_.begin(), r, list + l);
      std::copy_n(scratch_bins_.begin(), r, list_bins + l);
    }

    left.depth = right.depth = parent.depth + 1;
    left.begin = parent.begin;
    left.end = right.begin = parent.begin + n_left;
    right.end = parent.end;
    right.rows = parent.rows - left.rows;
    right.positives = parent.positives - left.positives;
    left.grad = parent.best.grad_left;
    left.hess = parent.best.hess_left;
    right.grad = parent.grad - left.grad;
    right.hess = parent.hess - left.hess;

    left.node = static_cast<int>(tree.nodes.size());
    right.node = left.node + 1;
    tree.nodes.resize(tree.nodes.size() + 2);
    auto& node = tree.nodes[static_cast<std::size_t>(parent.node)];
    node.feature = static_cast<int>(feature);
    node.bin_threshold = threshold_bin;
    node.threshold = bins_.thresholds[feature][threshold_bin];
    node.left = left.node;
    node.right = right.node;
    tree.nodes[static_cast<std::size_t>(left.node)].cover = left.rows;
    tree.nodes[static_cast<std::size_t>(right.node)].cover = right.rows;

    if (splittable(left)) evaluate(left);
    if (splittable(right)) evaluate(right);
    return {left, right};
  }

  const BoostParams& params_;
  const BinMapper& bins_;
  const RowGroups& groups_;
  std::size_t n_;
  std::span<const double> grad_;
  std::span<const double> hess_;
  std::vector<std::size_t> active_;
  std::vector<std::uint32_t> order_;  // per feature, groups sorted by bin
  std::vector<std::uint32_t> work_;   // order_ partitioned by the current tree
  std::vector<std::uint8_t> work_bins_;  // bin of each entry of work_
  std::vector<std::uint32_t> scratch_;
  std::vector<std::uint8_t> scratch_bins_;
  std::vector<char> goes_left_;
};

// Mean log-loss of the current group scores; refreshes the group gradient and
// hessian sums from the same exponentials.
double loss_and_gradients(std::span<const double> raw, const RowGroups& groups, std::span<double> grad,
                          std::span<double> hess, double total_rows) {
  double total = 0.0;
  for (std::size_t u = 0; u < groups.count; ++u) {
    const double z = raw[u];
    const double e = std::exp(-std::abs(z));
    const double p = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    total += groups.size[u] * (std::max(z, 0.0) + std::log(1.0 + e)) - groups.positives[u] * z;
    grad[u] = groups.size[u] * p - groups.positives[u];
    hess[u] = groups.size[u] * std::max(p * (1.0 - p), 1e-16);
  }
  return total / total_rows;
}

double group_log_loss(std::span<const double> raw, const RowGroups& groups, double total_rows) {
  double total = 0.0;
  for (std::size_t u = 0; u < groups.count; ++u)
    total += groups.size[u] * softplus(raw[u]) - groups.positives[u] * raw[u];
  return total / total_rows;
}

double mean_log_loss(std::span<const double> raw, std::span<const int> y, std::span<const std::uint32_t> rows) {
  double total = 0.0;
  for (std::uint32_t r : rows) total += softplus(raw[r]) - static_cast<double>(y[r]) * raw[r];
  return total / static_cast<double>(rows.size());
}

}  // namespace

BoostedModel fit_histgbm(const Matrix& x, std::span<const int> y, const BoostParams& params,
                         std::uint64_t seed) {
  check_shape(x, y);
  require_both_classes(y);
  validate(params);

  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  Rng rng(seed);

  std::vector<std::uint32_t> train_rows(n);
  std::iota(train_rows.begin(), train_rows.end(), 0u);
  std::vector<std::uint32_t> valid_rows;
  if (params.early_stopping_rounds > 0) {
    rng.shuffle(std::span(train_rows));
    const auto n_valid = static_cast<std::size_t>(std::ceil(params.validation_fraction * static_cast<double>(n)));
    valid_rows.assign(train_rows.end() - static_cast<std::ptrdiff_t>(n_valid), train_rows.end());
    train_rows.resize(n - n_valid);
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(valid_rows.begin(), valid_rows.end());
    std::vector<int> train_y;
    for (auto r : train_rows) train_y.push_back(y[r]);
    require_both_classes(train_y);
  }

  BoostedModel model;
  model.params = params;
  model.seed = seed;
  model.learning_rate = params.learning_rate;
  model.feature_count = d;
  {
    std::vector<std::size_t> idx(train_rows.begin(), train_rows.end());
    model.bin_mapper = quantile_bin(valid_rows.empty() ? x : x.select_rows(idx), params.max_bins);
  }
  const auto binned = model.bin_mapper.transform(x);
  const RowGroups groups = group_rows(binned, n, d, train_rows, y);
  const auto total_rows = static_cast<double>(train_rows.size());

  double positives = 0.0;
  for (auto r : train_rows) positives += y[r];
  const double prior = positives / total_rows;
  model.base_score = std::log(prior / (1.0 - prior));

  std::vector<double> raw(groups.count, model.base_score);
  std::vector<double> valid_raw(valid_rows.size(), model.base_score);
  std::vector<double> grad(groups.count, 0.0), hess(groups.count, 0.0);

  const std::size_t n_active =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(params.feature_fraction * static_cast<double>(d))));
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t rounds_without_gain = 0;
  TreeGrower grower(params, model.bin_mapper, groups);
  std::vector<TreeGrower::LeafRange> leaves;
  std::vector<std::uint8_t> row_bins(d);

  for (std::size_t t = 0; t < params.n_trees; ++t) {
    model.train_loss.push_back(loss_and_gradients(raw, groups, grad, hess, total_rows));

    std::vector<std::size_t> active(d);
    std::iota(active.begin(), active.end(), 0);
    if (n_active < d) {
      rng.shuffle(std::span(active));
      active.resize(n_active);
      std::sort(active.begin(), active.end());
    }

    Tree tree = grower.grow(grad, hess, std::move(active), leaves);
    const auto units = grower.units();
    for (const auto& leaf : leaves) {
      const double delta = params.learning_rate * tree.nodes[static_cast<std::size_t>(leaf.node)].value;
      for (std::size_t i = leaf.begin; i < leaf.end; ++i) raw[units[i]] += delta;
    }
    for (std::size_t i = 0; i < valid_rows.size(); ++i) {
      model.bin_mapper.bin_row(x.row(valid_rows[i]), row_bins.data());
      valid_raw[i] += params.learning_rate * tree.nodes[tree.leaf_for_binned(row_bins.data())].value;
    }
    model.trees.push_back(std::move(tree));

    if (!valid_rows.empty()) {
      std::vector<std::uint32_t> idx(valid_rows.size());
      std::iota(idx.begin(), idx.end(), 0u);
      std::vector<int> valid_y;
      for (auto r : valid_rows) valid_y.push_back(y[r]);
      const double loss = mean_log_loss(valid_raw, valid_y, idx);
      if (loss < best_valid - 1e-7) {
        best_valid = loss;
        rounds_without_gain = 0;
      } else if (++rounds_without_gain >= params.early_stopping_rounds) {
        break;
      }
    }
  }
  model.train_loss.push_back(group_log_loss(raw, groups, total_rows));
  return model;
}

std::vector<double> predict_proba(const LogisticModel& model, const Matrix& rows) {
  std::vector<double> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = model.predict(rows.row(r));
  return out;
}

std::vector<double> predict_proba(const BoostedModel& model, const Matrix& rows) {
  if (rows.cols() != model.feature_count && rows.rows() > 0)
    throw Error(ErrorCode::WidthMismatch, "matrix has " + std::to_string(rows.cols()) +
                                              " columns, model expects " + std::to_string(model.feature_count));
  // Rows with the same bins share every leaf, so each distinct bin vector is
  // scored once.
  const std::size_t n = rows.rows();
  const std::size_t d = model.feature_count;
  std::vector<std::uint8_t> binned(n * d);
  for (std::size_t r = 0; r < n; ++r) model.bin_mapper.bin_row(rows.row(r), binned.data() + r * d);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t r) { return binned.data() + r * d; };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const int c = std::memcmp(key(a), key(b), d);
    return c != 0 ? c < 0 : a < b;
  });

  std::vector<std::size_t> distinct;
  for (std::size_t i = 0; i < n; ++i)
    if (i == 0 || std::memcmp(key(order[i - 1]), key(order[i]), d) != 0) distinct.push_back(order[i]);
  // Tree-major so each tree stays in cache while every distinct row walks it.
  std::vector<double> sum(distinct.size(), 0.0);
  for (const auto& tree : model.trees)
    for (std::size_t k = 0; k < distinct.size(); ++k)
      sum[k] += tree.nodes[tree.leaf_for_binned(key(distinct[k]))].value;

  std::vector<double> out(n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && std::memcmp(key(order[i - 1]), key(order[i]), d) != 0) ++k;
    out[order[i]] = sigmoid(model.base_score + model.learning_rate * sum[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

json to_json(const LogisticModel& m) {
  return json{{"schema_version", kModelSchemaVersion},
              {"kind", "logistic"},
              {"weights", m.weights},
              {"intercept", m.intercept},
              {"l2_strength", m.l2_strength},
              {"converged", m.converged},
              {"iterations", m.iterations}};
}

namespace {

void expect_kind(const json& j, const char* kind) {
  if (!j.is_object() || j.value("kind", "") != kind)
    throw Error(ErrorCode::SchemaViolation, std::string("expected a '") + kind + "' model");
  if (j.value("schema_version", 0) != kModelSchemaVersion)
    throw Error(ErrorCode::SchemaViolation, "unsupported model schema_version");
}

}  // namespace

LogisticModel logistic_from_json(const json& j) {
  expect_kind(j, "logistic");
  try {
    LogisticModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    m.l2_strength = j.at("l2_strength").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<std::size_t>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("logistic model: ") + e.what());
  }
}

json to_json(const BoostedModel& m) {
  json trees = json::array();
  for (const auto& tree : m.trees) {
    json feature = json::array(), bin = json::array(), threshold = json::array(), left = json::array(),
         right = json::array(), value = json::array(), cover = json::array();
    for (const auto& node : tree.nodes) {
      feature.push_back(node.feature);
      bin.push_back(node.bin_threshold);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
      value.push_back(node.value);
      cover.push_back(node.cover);
    }
    trees.push_back(json{{"feature", feature}, {"bin", bin}, {"threshold", threshold}, {"left", left},
                         {"right", right}, {"value", value}, {"cover", cover}});
  }
  return json{{"schema_version", kModelSchemaVersion},
              {"kind", "histgbm"},
              {"params", to_json(m.params)},
              {"seed", m.seed},
              {"base_score", m.base_score},
              {"learning_rate", m.learning_rate},
              {"feature_count", m.feature_count},
              {"bin_thresholds", m.bin_mapper.thresholds},
              {"trees", trees},
              {"train_loss", m.train_loss}};
}

BoostedModel boosted_from_json(const json& j) {
  expect_kind(j, "histgbm");
  try {
    BoostedModel m;
    m.params = boost_params_from_json(j.at("params"));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.base_score = j.at("base_score").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.feature_count = j.at("feature_count").get<std::size_t>();
    m.bin_mapper.thresholds = j.at("bin_thresholds").get<std::vector<std::vector<double>>>();
    m.train_loss = j.at("train_loss").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) {
      Tree tree;
      const auto& feature = t.at("feature");
      const std::size_t count = feature.size();
      tree.nodes.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        auto& node = tree.nodes[i];
        node.feature = feature[i].get<int>();
        node.bin_threshold = t.at("bin")[i].get<std::uint8_t>();
        node.threshold = t.at("threshold")[i].get<double>();
        node.left = t.at("left")[i].get<int>();
        node.right = t.at("right")[i].get<int>();
        node.value = t.at("value")[i].get<double>();
        node.cover = t.at("cover")[i].get<double>();
        if (node.feature >= static_cast<int>(m.feature_count))
          throw Error(ErrorCode::SchemaViolation, "tree node feature id out of range");
      }
      m.trees.push_back(std::move(tree));
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("boosted model: ") + e.what());
  }
}

}  // namespace hyposcreen
