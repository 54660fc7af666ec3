// Log-domain Sinkhorn for 1-D empirical measures with cost |x - y|.
//
// With both supports sorted, exp(-|x - y| / eps) splits into a "left" part
// exp((y - x) / eps) for y <= x and a "right" part exp((x - y) / eps) for
// y > x. Every log-sum-exp over the opposite sample is then a prefix or a
// suffix log-sum-exp, so an iteration costs O(n + m) instead of O(n m).

#include "dcfair/errors.hpp"
#include "dcfair/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dcfair::losses {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Running log(sum(exp(v))) with a moving pivot.
struct LseAccumulator {
  double pivot = kNegInf;
  double sum = 0.0;

  void add(double v) {
    if (v == kNegInf) return;
    if (v <= pivot) {
      sum += std::exp(v - pivot);
    } else {
      sum = sum * std::exp(pivot - v) + 1.0;
      pivot = v;
    }
  }
  double value() const { return pivot == kNegInf ? kNegInf : pivot + std::log(sum); }
};

std::vector<std::size_t> argsort(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  return idx;
}

// Prefix/suffix tables over the sorted support `pts` with potential `pot`:
//   left[k]  = LSE_{j<k}  (pot_j + pts_j) / eps
//   right[k] = LSE_{j>=k} (pot_j - pts_j) / eps
struct SweepTables {
  std::vector<double> left;
  std::vector<double> right;

  void build(const std::vector<double>& pts, const std::vector<double>& pot, double eps) {
    const std::size_t m = pts.size();
    left.assign(m + 1, kNegInf);
    right.assign(m + 1, kNegInf);
    LseAccumulator acc;
    for (std::size_t j = 0; j < m; ++j) {
      acc.add((pot[j] + pts[j]) / eps);
      left[j + 1] = acc.value();
    }
    acc = {};
    for (std::size_t j = m; j-- > 0;) {
      acc.add((pot[j] - pts[j]) / eps);
      right[j] = acc.value();
    }
  }
};

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// out_i = LSE_j (pot_j - |x_i - y_j|) / eps for sorted x against the sorted
// support y described by `t`.
void soft_min(const std::vector<double>& x, const std::vector<double>& y, const SweepTables& t, double eps,
              std::vector<double>& out) {
  out.resize(x.size());
  std::size_t k = 0;  // #{y_j <= x_i}
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (k < y.size() && y[k] <= x[i]) ++k;
    out[i] = log_add(t.left[k] - x[i] / eps, t.right[k] + x[i] / eps);
  }
}

// Plan mass of row i split by sign of (x_i - y_j); returns (below, above).
// Ties (y_j == x_i) carry zero cost and contribute to neither side.
void signed_mass(const std::vector<double>& x, const std::vector<double>& pot_x, const std::vector<double>& y,
                 const SweepTables& t, double eps, std::vector<double>& grad) {
  grad.resize(x.size());
  std::size_t lt = 0;  // #{y_j < x_i}
  std::size_t le = 0;  // #{y_j <= x_i}
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (lt < y.size() && y[lt] < x[i]) ++lt;
    if (le < lt) le = lt;
    while (le < y.size() && y[le] <= x[i]) ++le;
    const double below = std::exp(pot_x[i] / eps + t.left[lt] - x[i] / eps);
    const double above = std::exp(pot_x[i] / eps + t.right[le] + x[i] / eps);
    grad[i] = below - above;
  }
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("sinkhorn epsilon must be > 0");
  if (max_iters < 1) throw ConfigError("sinkhorn max_iters must be >= 1");
  if (!(tol >= 0.0)) throw ConfigError("sinkhorn tol must be >= 0");
}

SinkhornResult sinkhorn_w1(std::span<const double> a, std::span<const double> b, const SinkhornConfig& cfg) {
  cfg.validate();
  if (a.empty() || b.empty()) throw DomainError("sinkhorn_w1 needs two nonempty samples");
  for (double v : a)
    if (!std::isfinite(v)) throw ValueError("sinkhorn_w1: non-finite score");
  for (double v : b)
    if (!std::isfinite(v)) throw ValueError("sinkhorn_w1: non-finite score");

  const std::size_t n = a.size();
  const std::size_t m = b.size();
  const double eps = cfg.epsilon;
  const auto order_a = argsort(a);
  const auto order_b = argsort(b);

  // Centre the supports; the cost is translation invariant.
  const double lo = std::min(a[order_a.front()], b[order_b.front()]);
  const double hi = std::max(a[order_a.back()], b[order_b.back()]);
  const double centre = 0.5 * (lo + hi);
  std::vector<double> x(n), y(m);
  for (std::size_t i = 0; i < n; ++i) x[i] = a[order_a[i]] - centre;
  for (std::size_t j = 0; j < m; ++j) y[j] = b[order_b[j]] - centre;

  const double log_mu = -std::log(static_cast<double>(n));
  const double log_nu = -std::log(static_cast<double>(m));
  const double mu = 1.0 / static_cast<double>(n);

  std::vector<double> f(n, 0.0), g(m, 0.0), row_lse, col_lse;
  std::vector<double> best_f, best_g;
  double best_violation = std::numeric_limits<double>::infinity();
  SweepTables tables;
  SinkhornResult result;

  for (int it = 0;; ++it) {
    tables.build(y, g, eps);
    soft_min(x, y, tables, eps, row_lse);
    if (it > 0) {
      double violation = 0.0;
      for (std::size_t i = 0; i < n; ++i) violation += std::abs(std::exp(f[i] / eps + row_lse[i]) - mu);
      if (violation < best_violation) {
        best_violation = violation;
        best_f = f;
        best_g = g;
      }
      result.iterations = it;
      if (violation < cfg.tol) {
        result.converged = true;
        break;
      }
      if (it >= cfg.max_iters) break;
    }
    for (std::size_t i = 0; i < n; ++i) f[i] = eps * (log_mu - row_lse[i]);
    tables.build(x, f, eps);
    soft_min(y, x, tables, eps, col_lse);
    for (std::size_t j = 0; j < m; ++j) g[j] = eps * (log_nu - col_lse[j]);
  }
  f = std::move(best_f);
  g = std::move(best_g);
  result.marginal_violation = best_violation;

  // Plan statistics at the selected iterate.
  SweepTables tab_y, tab_x;
  tab_y.build(y, g, eps);
  tab_x.build(x, f, eps);
  std::vector<double> gx, gy;
  signed_mass(x, f, y, tab_y, eps, gx);
  signed_mass(y, g, x, tab_x, eps, gy);
  soft_min(x, y, tab_y, eps, row_lse);
  soft_min(y, x, tab_x, eps, col_lse);

  // <P, C> = sum_i x_i d/dx_i + sum_j y_j d/dy_j for the piecewise-linear cost.
  double distance = 0.0;
  double regularized = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    distance += x[i] * gx[i];
    const double r = std::exp(f[i] / eps + row_lse[i]);
    regularized += r * (f[i] - eps * log_mu);
  }
  for (std::size_t j = 0; j < m; ++j) {
    distance += y[j] * gy[j];
    const double c = std::exp(g[j] / eps + col_lse[j]);
    regularized += c * (g[j] - eps * log_nu);
  }
  result.distance = std::max(distance, 0.0);
  result.regularized = regularized;
  result.grad_a.assign(n, 0.0);
  result.grad_b.assign(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) result.grad_a[order_a[i]] = gx[i];
  for (std::size_t j = 0; j < m; ++j) result.grad_b[order_b[j]] = gy[j];
  return result;
}

}  // namespace dcfair::losses
