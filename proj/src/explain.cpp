#include "hyposcreen/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyposcreen/error.hpp"
#include "hyposcreen/kernels.hpp"
#include "hyposcreen/parallel.hpp"

namespace hyposcreen {

namespace {

void check_width(const BoostedModel& model, std::span<const double> row) {
  if (row.size() != model.feature_count)
    throw Error(ErrorCode::WidthMismatch, "row has " + std::to_string(row.size()) +
                                              " values, model expects " + std::to_string(model.feature_count));
}

bool goes_left(const BoostedModel& model, const TreeNode& node, std::span<const double> row) {
  const auto f = static_cast<std::size_t>(node.feature);
  return model.bin_mapper.bin(f, row[f]) <= node.bin_threshold;
}

double node_expectation(const Tree& tree, std::size_t id) {
  const auto& node = tree.nodes[id];
  if (node.is_leaf()) return node.value;
  const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
  const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
  return (l.cover * node_expectation(tree, static_cast<std::size_t>(node.left)) +
          r.cover * node_expectation(tree, static_cast<std::size_t>(node.right))) /
         node.cover;
}

// --- path-dependent TreeSHAP -------------------------------------------------

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

void extend_path(std::vector<PathElement>& path, std::size_t depth, double zero_fraction,
                 double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].weight += one_fraction * path[i].weight * static_cast<double>(i + 1) / d1;
    path[i].weight = zero_fraction * path[i].weight * static_cast<double>(depth - i) / d1;
  }
}

void unwind_path(std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next * d1 / (static_cast<double>(i + 1) * one);
      next = tmp - path[i].weight * zero * static_cast<double>(depth - i) / d1;
    } else {
      path[i].weight = path[i].weight * d1 / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

double unwound_path_sum(const std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next = path[depth].weight;
  double total = 0.0;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = next * d1 / (static_cast<double>(i + 1) * one);
      total += tmp;
      next = path[i].weight - tmp * zero * static_cast<double>(depth - i) / d1;
    } else {
      total += path[i].weight / zero * d1 / static_cast<double>(depth - i);
    }
  }
  return total;
}

void shap_recurse(const BoostedModel& model, const Tree& tree, std::size_t id, std::span<const double> row,
                  std::vector<double>& phi, std::vector<PathElement> path, std::size_t depth,
                  double zero_fraction, double one_fraction, int feature, double scale) {
  if (path.size() < depth + 1) path.resize(depth + 1);
  extend_path(path, depth, zero_fraction, one_fraction, feature);
  const auto& node = tree.nodes[id];

  if (node.is_leaf()) {
    for (std::size_t i = 1; i <= depth; ++i) {
      const double w = unwound_path_sum(path, depth, i);
      const auto& el = path[i];
      phi[static_cast<std::size_t>(el.feature)] += w * (el.one_fraction - el.zero_fraction) * node.value * scale;
    }
    return;
  }

  const bool left = goes_left(model, node, row);
  const auto hot = static_cast<std::size_t>(left ? node.left : node.right);
  const auto cold = static_cast<std::size_t>(left ? node.right : node.left);
  const double hot_zero = tree.nodes[hot].cover / node.cover;
  const double cold_zero = tree.nodes[cold].cover / node.cover;

  double incoming_zero = 1.0, incoming_one = 1.0;
  std::size_t index = 0;
  while (index <= depth && path[index].feature != node.feature) ++index;
  if (index <= depth) {
    incoming_zero = path[index].zero_fraction;
    incoming_one = path[index].one_fraction;
    unwind_path(path, depth, index);
    --depth;
  }
  shap_recurse(model, tree, hot, row, phi, path, depth + 1, hot_zero * incoming_zero, incoming_one,
               node.feature, scale);
  shap_recurse(model, tree, cold, row, phi, path, depth + 1, cold_zero * incoming_zero, 0.0, node.feature,
               scale);
}

// --- coalition value function --------------------------------------------------

double conditional_expectation(const BoostedModel& model, const Tree& tree, std::size_t id,
                               std::span<const double> row, std::uint32_t coalition) {
  const auto& node = tree.nodes[id];
  if (node.is_leaf()) return node.value;
  const auto l = static_cast<std::size_t>(node.left);
  const auto r = static_cast<std::size_t>(node.right);
  if (coalition & (1u << node.feature))
    return conditional_expectation(model, tree, goes_left(model, node, row) ? l : r, row, coalition);
  return (tree.nodes[l].cover * conditional_expectation(model, tree, l, row, coalition) +
          tree.nodes[r].cover * conditional_expectation(model, tree, r, row, coalition)) /
         node.cover;
}

}  // namespace

double tree_expectation(const Tree& tree) { return node_expectation(tree, 0); }

double shap_base_value(const BoostedModel& model) {
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree_expectation(tree);
  return model.base_score + model.learning_rate * sum;
}

ShapAttribution tree_shap(const BoostedModel& model, std::span<const double> row, std::size_t row_id) {
  check_width(model, row);
  ShapAttribution out;
  out.row_id = row_id;
  out.values.assign(model.feature_count, 0.0);
  out.base_value = shap_base_value(model);
  std::vector<PathElement> path;
  for (const auto& tree : model.trees) {
    if (tree.nodes.empty() || tree.nodes[0].is_leaf()) continue;
    path.assign(1, PathElement{});
    shap_recurse(model, tree, 0, row, out.values, path, 0, 1.0, 1.0, -1, model.learning_rate);
  }
  return out;
}

ShapAttribution exact_shapley_oracle(const BoostedModel& model, std::span<const double> row,
                                     std::size_t row_id) {
  check_width(model, row);
  const std::size_t d = model.feature_count;
  if (d > kMaxOracleFeatures)
    throw Error(ErrorCode::TooManyFeatures, std::to_string(d) + " features exceed the enumeration limit of " +
                                                std::to_string(kMaxOracleFeatures));
  const std::uint32_t subsets = 1u << d;
  std::vector<double> value(subsets, 0.0);
  for (std::uint32_t s = 0; s < subsets; ++s) {
    double sum = 0.0;
    for (const auto& tree : model.trees) sum += conditional_expectation(model, tree, 0, row, s);
    value[s] = model.base_score + model.learning_rate * sum;
  }

  std::vector<double> factorial(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

  ShapAttribution out;
  out.row_id = row_id;
  out.base_value = value[0];
  out.values.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const std::uint32_t bit = 1u << i;
    for (std::uint32_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      const double weight = factorial[size] * factorial[d - size - 1] / factorial[d];
      out.values[i] += weight * (value[s | bit] - value[s]);
    }
  }
  return out;
}

std::vector<double> mean_abs_shap(const BoostedModel& model, const Matrix& x) {
  if (x.rows() == 0) throw Error(ErrorCode::EmptyMatrix, "no rows to attribute");
  std::vector<ShapAttribution> rows(x.rows());
  parallel_for(x.rows(), [&](std::size_t r) { rows[r] = tree_shap(model, x.row(r), r); });
  std::vector<double> out(model.feature_count, 0.0);
  for (const auto& a : rows)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += std::abs(a.values[j]);
  for (double& v : out) v /= static_cast<double>(x.rows());
  return out;
}

// --- PCA -----------------------------------------------------------------------

namespace {

using Square = std::vector<double>;  // p x p row-major

double frobenius(const Square& a) { return std::sqrt(kernels::dot(a, a)); }

Square multiply(const Square& a, const Square& b, std::size_t p) {
  Square out(p * p, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < p; ++k)
      kernels::axpy(a[i * p + k], std::span(b.data() + k * p, p), std::span(out.data() + i * p, p));
  return out;
}

std::vector<double> mat_vec(const Square& a, std::span<const double> v, std::size_t p) {
  std::vector<double> out(p);
  for (std::size_t i = 0; i < p; ++i) out[i] = kernels::dot(std::span(a.data() + i * p, p), v);
  return out;
}

void orthogonalize(std::vector<double>& v, const std::vector<std::vector<double>>& basis) {
  for (const auto& b : basis) kernels::axpy(-kernels::dot(v, b), b, v);
}

bool normalize(std::vector<double>& v) {
  const double n = std::sqrt(kernels::dot(v, v));
  if (!(n > 1e-300)) return false;
  for (double& x : v) x /= n;
  return true;
}

// Leading eigenvector of the symmetric PSD matrix a restricted to the
// complement of `found`. Power iteration runs on a^16 (by repeated squaring)
// so nearly tied eigenvalues still separate quickly; convergence is judged by
// the residual against a itself.
std::vector<double> leading_eigenvector(const Square& a, std::size_t p,
                                        const std::vector<std::vector<double>>& found) {
  const double scale = frobenius(a);
  auto fallback = [&] {
    for (std::size_t e = 0; e < p; ++e) {
      std::vector<double> v(p, 0.0);
      v[e] = 1.0;
      orthogonalize(v, found);
      orthogonalize(v, found);
      if (std::sqrt(kernels::dot(v, v)) > 1e-6 && normalize(v)) return v;
    }
    return std::vector<double>(p, 0.0);
  };
  if (!(scale > 1e-13 * static_cast<double>(p))) return fallback();

  Square b = a;
  for (double& x : b) x /= scale;
  for (int s = 0; s < 4; ++s) {
    b = multiply(b, b, p);
    const double f = frobenius(b);
    if (!(f > 1e-300)) return fallback();
    for (double& x : b) x /= f;
  }

  std::vector<double> v(p);
  for (std::size_t i = 0; i < p; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  orthogonalize(v, found);
  if (!normalize(v)) return fallback();

  constexpr double kTol = 1e-10;
  for (int iter = 0; iter < 20000; ++iter) {
    auto w = mat_vec(b, v, p);
    orthogonalize(w, found);
    if (!normalize(w)) return fallback();
    v = std::move(w);
    const auto av = mat_vec(a, v, p);
    const double lambda = kernels::dot(v, av);
    double residual = 0.0;
    for (std::size_t i = 0; i < p; ++i) residual += (av[i] - lambda * v[i]) * (av[i] - lambda * v[i]);
    if (std::sqrt(residual) <= kTol * std::max(1.0, std::abs(lambda))) break;
  }
  return v;
}

}  // namespace

Projection2D pca_project(const Matrix& x, std::size_t n_components) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (n < 2) throw Error(ErrorCode::TooFewRows, "PCA needs at least 2 rows");
  if (n_components == 0 || d < n_components)
    throw Error(ErrorCode::BadShape, "PCA needs at least as many columns as components");

  Projection2D out;
  std::vector<std::size_t> kept;
  std::vector<std::vector<double>> z;  // standardized kept columns
  for (std::size_t j = 0; j < d; ++j) {
    auto col = x.column(j);
    const double mean = kernels::sum(col) / static_cast<double>(n);
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      out.dropped.push_back(j);
      continue;
    }
    for (double& v : col) v = (v - mean) / sd;
    kept.push_back(j);
    z.push_back(std::move(col));
  }
  const std::size_t p = kept.size();
  if (p < n_components)
    throw Error(ErrorCode::BadShape, "only " + std::to_string(p) + " non-constant columns for " +
                                         std::to_string(n_components) + " components");

  Square corr(p * p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j)
      corr[i * p + j] = corr[j * p + i] = kernels::dot(z[i], z[j]) / static_cast<double>(n);

  Square deflated = corr;
  std::vector<std::vector<double>> found;
  out.components = Matrix(n_components, d);
  out.coordinates = Matrix(n, n_components);
  for (std::size_t k = 0; k < n_components; ++k) {
    auto v = leading_eigenvector(deflated, p, found);
    std::size_t big = 0;
    for (std::size_t i = 1; i < p; ++i)
      if (std::abs(v[i]) > std::abs(v[big])) big = i;
    if (v[big] < 0.0)
      for (double& c : v) c = -c;

    const double lambda = kernels::dot(v, mat_vec(corr, v, p));
    const double deflate = kernels::dot(v, mat_vec(deflated, v, p));
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) deflated[i * p + j] -= deflate * v[i] * v[j];

    out.explained.push_back(std::clamp(lambda / static_cast<double>(p), 0.0, 1.0));
    for (std::size_t i = 0; i < p; ++i) out.components(k, kept[i]) = v[i];
    for (std::size_t r = 0; r < n; ++r) {
      double c = 0.0;
      for (std::size_t i = 0; i < p; ++i) c += z[i][r] * v[i];
      out.coordinates(r, k) = c;
    }
    found.push_back(std::move(v));
  }
  return out;
}

double silhouette_score(const Matrix& points, std::span<const int> labels) {
  const std::size_t n = points.rows();
  if (labels.size() != n) throw Error(ErrorCode::LengthMismatch, "label count differs from point count");
  if (n < 3) throw Error(ErrorCode::TooFewRows, "silhouette needs at least 3 points");
  std::size_t count[2] = {0, 0};
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error(ErrorCode::SchemaViolation, "silhouette labels must be 0 or 1");
    ++count[y];
  }
  if (count[0] == 0 || count[1] == 0) throw Error(ErrorCode::SingleCluster, "only one cluster present");

  std::vector<double> score(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const int own = labels[i];
    if (count[own] == 1) return;
    double same = 0.0, other = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dist = std::sqrt(kernels::squared_distance(points.row(i), points.row(j)));
      (labels[j] == own ? same : other) += dist;
    }
    const double a = same / static_cast<double>(count[own] - 1);
    const double b = other / static_cast<double>(count[1 - own]);
    const double denom = std::max(a, b);
    score[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  });
  double total = 0.0;
  for (double s : score) total += s;
  return total / static_cast<double>(n);
}

}  // namespace hyposcreen
