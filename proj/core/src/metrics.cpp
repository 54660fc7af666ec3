#include "dcfair/metrics.hpp"

#include "dcfair/csv.hpp"
#include "dcfair/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dcfair::metrics {

namespace {

constexpr double kMinBandwidth = 1e-3;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

void check_tau(double tau) {
  if (!(tau >= 0.0 && tau < 1.0)) throw SpecError("tau must lie in [0, 1)");
}

// numpy-style linear interpolation quantile on a sorted sample.
double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double total = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) total += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  return total;
}

}  // namespace

std::vector<double> ScoreSet::group_scores(std::uint8_t s) const {
  std::vector<double> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (protected_attr[i] == s) out.push_back(scores[i]);
  return out;
}

void ScoreSet::validate() const {
  if (labels.size() != scores.size() || protected_attr.size() != scores.size()) {
    throw ShapeError("score set arrays have mismatched lengths");
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) throw ValueError("scores must lie in [0, 1]");
    if (labels[i] > 1 || protected_attr[i] > 1) throw ValueError("labels and protected attribute must be 0/1");
  }
}

void ScoreSet::require_both_groups() const {
  bool seen[2] = {false, false};
  for (auto s : protected_attr) seen[s ? 1 : 0] = true;
  if (!seen[0] || !seen[1]) throw DomainError("both protected groups must be nonempty");
}

void GridSpec::validate() const {
  if (points < 101) throw SpecError("grid needs at least 101 points");
  if (fixed_bandwidth && !(*fixed_bandwidth > 0.0)) throw SpecError("fixed bandwidth must be > 0");
}

std::vector<double> GridSpec::grid() const {
  std::vector<double> g(points);
  const double step = 1.0 / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) g[k] = static_cast<double>(k) * step;
  g.back() = 1.0;
  return g;
}

Ecdf::Ecdf(std::span<const double> sample) : sorted_(sample.begin(), sample.end()) {
  if (sorted_.empty()) throw DomainError("ecdf of empty sample");
  std::sort(sorted_.begin(), sorted_.end());
}

double Ecdf::operator()(double x) const {
  const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin();
  return static_cast<double>(count) / static_cast<double>(sorted_.size());
}

std::vector<double> Ecdf::breakpoints() const {
  std::vector<double> out(sorted_);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double silverman_bandwidth(std::span<const double> sample) {
  if (sample.empty()) throw DomainError("bandwidth of empty sample");
  const std::size_t n = sample.size();
  if (n == 1) return kMinBandwidth;
  const double mean = std::accumulate(sample.begin(), sample.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : sample) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 1.34;
  // A degenerate IQR (heavy ties) falls back to the standard deviation.
  const double spread = (sd > 0.0 && iqr > 0.0) ? std::min(sd, iqr) : std::max(sd, iqr);
  return std::max(kMinBandwidth, 0.9 * spread * std::pow(static_cast<double>(n), -0.2));
}

double Density::at(double x) const {
  if (x <= grid.front()) return values.front();
  if (x >= grid.back()) return values.back();
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - grid.begin()) - 1;
  const double w = (x - grid[k]) / (grid[k + 1] - grid[k]);
  return values[k] + w * (values[k + 1] - values[k]);
}

Density kde_pdf(std::span<const double> sample, const GridSpec& spec) {
  spec.validate();
  if (sample.empty()) throw DomainError("kde of empty sample");
  Density d;
  d.grid = spec.grid();
  d.bandwidth = spec.fixed_bandwidth ? *spec.fixed_bandwidth : silverman_bandwidth(sample);
  const double h = d.bandwidth;
  const double coef = kInvSqrt2Pi / (h * static_cast<double>(sample.size()));
  d.raw_values.assign(d.grid.size(), 0.0);
  for (std::size_t k = 0; k < d.grid.size(); ++k) {
    double acc = 0.0;
    for (double v : sample) {
      const double z = (d.grid[k] - v) / h;
      acc += std::exp(-0.5 * z * z);
    }
    d.raw_values[k] = coef * acc;
  }
  d.normalizer = trapezoid(d.grid, d.raw_values);
  d.values = d.raw_values;
  if (d.normalizer > 0.0) {
    for (double& v : d.values) v /= d.normalizer;
  }
  return d;
}

double abpc_tau(const ScoreSet& set, double tau, const GridSpec& grid) {
  check_tau(tau);
  set.require_both_groups();
  const Density f0 = kde_pdf(set.group_scores(0), grid);
  const Density f1 = kde_pdf(set.group_scores(1), grid);
  const auto& x = f0.grid;
  std::vector<double> gap(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) gap[k] = std::abs(f0.values[k] - f1.values[k]);

  // Integrate the piecewise-linear interpolant of the gap over [tau, 1],
  // with tau as an explicit node.
  const auto it = std::upper_bound(x.begin(), x.end(), tau);
  const std::size_t k = static_cast<std::size_t>(it - x.begin());  // first node > tau
  const double w = (tau - x[k - 1]) / (x[k] - x[k - 1]);
  const double gap_tau = gap[k - 1] + w * (gap[k] - gap[k - 1]);
  double total = 0.5 * (x[k] - tau) * (gap_tau + gap[k]);
  for (std::size_t j = k + 1; j < x.size(); ++j) total += 0.5 * (x[j] - x[j - 1]) * (gap[j] + gap[j - 1]);
  return total;
}

double ecdf_gap_integral(std::span<const double> a, std::span<const double> b, double lo, double hi) {
  if (a.empty() || b.empty()) throw DomainError("ecdf gap needs two nonempty samples");
  if (!(hi >= lo)) return 0.0;
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());

  std::vector<double> cuts;
  cuts.reserve(sa.size() + sb.size() + 2);
  cuts.push_back(lo);
  for (double v : sa)
    if (v > lo && v < hi) cuts.push_back(v);
  for (double v : sb)
    if (v > lo && v < hi) cuts.push_back(v);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double inv_a = 1.0 / static_cast<double>(sa.size());
  const double inv_b = 1.0 / static_cast<double>(sb.size());
  std::size_t ia = 0, ib = 0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    while (ia < sa.size() && sa[ia] <= cuts[k]) ++ia;
    while (ib < sb.size() && sb[ib] <= cuts[k]) ++ib;
    const double gap = std::abs(static_cast<double>(ia) * inv_a - static_cast<double>(ib) * inv_b);
    total += gap * (cuts[k + 1] - cuts[k]);
  }
  return total;
}

double abcc_tau(const ScoreSet& set, double tau) {
  check_tau(tau);
  set.require_both_groups();
  return ecdf_gap_integral(set.group_scores(0), set.group_scores(1), tau, 1.0);
}

PartialPrCurve partial_pr_curve(const ScoreSet& set, double tau) {
  check_tau(tau);
  if (set.labels.size() != set.scores.size()) throw ShapeError("score set arrays have mismatched lengths");
  const auto positives = std::count(set.labels.begin(), set.labels.end(), std::uint8_t{1});
  if (positives == 0) throw DomainError("auc_pr_tau needs at least one positive label");

  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return set.scores[i] > set.scores[j]; });

  PartialPrCurve curve;
  curve.tau = tau;
  std::size_t tp = 0, pp = 0, k = 0;
  const double total_pos = static_cast<double>(positives);
  while (k < order.size() && set.scores[order[k]] >= tau) {
    const double t = set.scores[order[k]];
    while (k < order.size() && set.scores[order[k]] == t) {
      tp += set.labels[order[k]];
      ++pp;
      ++k;
    }
    curve.points.push_back({t, static_cast<double>(tp) / static_cast<double>(pp),
                            static_cast<double>(tp) / total_pos, pp});
  }
  if (!curve.points.empty() && curve.points.back().threshold > tau) {
    PrPoint anchor = curve.points.back();
    anchor.threshold = tau;
    curve.points.push_back(anchor);
  }
  return curve;
}

double auc_pr_tau(const ScoreSet& set, double tau) {
  const PartialPrCurve curve = partial_pr_curve(set, tau);
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& p : curve.points) {
    area += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return area;
}

MetricReport evaluate(const ScoreSet& set, double tau, const GridSpec& grid) {
  set.validate();
  MetricReport r;
  r.tau = tau;
  r.auc_pr_tau = auc_pr_tau(set, tau);
  r.abpc_tau = abpc_tau(set, tau, grid);
  r.abcc_tau = abcc_tau(set, tau);
  for (auto s : set.protected_attr) (s ? r.n_s1 : r.n_s0)++;
  const auto above = std::count_if(set.scores.begin(), set.scores.end(), [tau](double v) { return v >= tau; });
  r.share_above_tau = set.size() ? static_cast<double>(above) / static_cast<double>(set.size()) : 0.0;
  return r;
}

std::string to_key_value(const MetricReport& r) {
  std::ostringstream os;
  os << "tau=" << csv::format_number(r.tau) << '\n'
     << "auc_pr_tau=" << csv::format_number(r.auc_pr_tau) << '\n'
     << "abpc_tau=" << csv::format_number(r.abpc_tau) << '\n'
     << "abcc_tau=" << csv::format_number(r.abcc_tau) << '\n'
     << "n_s0=" << r.n_s0 << '\n'
     << "n_s1=" << r.n_s1 << '\n'
     << "share_above_tau=" << csv::format_number(r.share_above_tau) << '\n';
  return os.str();
}

}  // namespace dcfair::metrics
