#pragma once

#include "dcfair/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcfair::metrics {

// Aligned (score, label, protected) triples produced by inference.
struct ScoreSet {
  std::vector<double> scores;
  Labels labels;
  Labels protected_attr;

  std::size_t size() const { return scores.size(); }
  std::vector<double> group_scores(std::uint8_t s) const;
  void validate() const;                 // lengths, scores in [0, 1], binary labels
  void require_both_groups() const;      // throws DomainError
};

struct GridSpec {
  std::size_t points = 1001;
  std::optional<double> fixed_bandwidth;  // Silverman's rule when unset

  void validate() const;
  std::vector<double> grid() const;  // uniform on [0, 1]
};

// Right-continuous empirical CDF.
class Ecdf {
 public:
  explicit Ecdf(std::span<const double> sample);

  double operator()(double x) const;
  const std::vector<double>& sorted() const { return sorted_; }
  // Distinct sample values (the jump locations).
  std::vector<double> breakpoints() const;

 private:
  std::vector<double> sorted_;
};

double silverman_bandwidth(std::span<const double> sample);

struct Density {
  std::vector<double> grid;
  std::vector<double> values;      // renormalized so the trapezoid integral on [0,1] is 1
  std::vector<double> raw_values;  // plain Gaussian mixture before renormalization
  double bandwidth = 0.0;
  double normalizer = 1.0;         // trapezoid integral of raw_values

  // Piecewise-linear interpolation of `values` at x in [0, 1].
  double at(double x) const;
};

Density kde_pdf(std::span<const double> sample, const GridSpec& grid = {});

double abpc_tau(const ScoreSet& set, double tau, const GridSpec& grid = {});
double abcc_tau(const ScoreSet& set, double tau);

// Integral of |F_a - F_b| over [lo, hi], exact on the merged breakpoints.
double ecdf_gap_integral(std::span<const double> a, std::span<const double> b, double lo, double hi);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t predicted_positive = 0;
};

struct PartialPrCurve {
  double tau = 0.0;
  // Distinct thresholds >= tau in descending order followed by the anchor at
  // tau (omitted when tau is itself a score). Points with no predicted
  // positives are not listed.
  std::vector<PrPoint> points;
};

PartialPrCurve partial_pr_curve(const ScoreSet& set, double tau);
double auc_pr_tau(const ScoreSet& set, double tau);

struct MetricReport {
  double tau = 0.0;
  double auc_pr_tau = 0.0;
  double abpc_tau = 0.0;
  double abcc_tau = 0.0;
  std::size_t n_s0 = 0;
  std::size_t n_s1 = 0;
  double share_above_tau = 0.0;
};

MetricReport evaluate(const ScoreSet& set, double tau, const GridSpec& grid = {});

// `key=value` lines, fixed key order, shortest round-trip numbers.
std::string to_key_value(const MetricReport& report);

}  // namespace dcfair::metrics
