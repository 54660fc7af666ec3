#pragma once

#include "dcfair/types.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dcfair::losses {

enum class FairnessVariant { None, Global, DecisionCentric };

struct FairnessMode {
  FairnessVariant variant = FairnessVariant::None;
  double k_pct = 1.0;  // only meaningful for DecisionCentric

  static FairnessMode none() { return {}; }
  static FairnessMode global() { return {FairnessVariant::Global, 1.0}; }
  static FairnessMode decision_centric(double k_pct) { return {FairnessVariant::DecisionCentric, k_pct}; }

  void validate() const;
  friend bool operator==(const FairnessMode&, const FairnessMode&) = default;
};

std::string to_string(FairnessVariant variant);
FairnessVariant parse_variant(const std::string& text);  // "none" | "global" | "decision-centric"

struct SinkhornConfig {
  double epsilon = 0.01;
  int max_iters = 200;
  double tol = 1e-6;

  void validate() const;
};

struct BceResult {
  double loss = 0.0;
  std::vector<double> gradient;  // d(mean loss)/d(score)
};

inline constexpr double kBceClamp = 1e-12;

BceResult bce(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Exact 1-Wasserstein distance between two empirical measures (uniform
// weights), via quantile matching on merged breakpoints.
double exact_w1(std::span<const double> a, std::span<const double> b);

struct SinkhornResult {
  // <P, C> for the final plan.
  double distance = 0.0;
  // <P, C> + epsilon * KL(P || a x b): the entropic objective whose exact
  // gradient (at convergence) is grad_a / grad_b.
  double regularized = 0.0;
  std::vector<double> grad_a;  // sum_j P_ij sign(a_i - b_j)
  std::vector<double> grad_b;  // sum_i P_ij sign(b_j - a_i)
  int iterations = 0;
  double marginal_violation = 0.0;
  bool converged = false;
};

// Entropic OT between uniform empirical measures on the real line with
// cost |a_i - b_j|, solved with log-domain Sinkhorn iterations.
SinkhornResult sinkhorn_w1(std::span<const double> a, std::span<const double> b,
                           const SinkhornConfig& cfg = {});

// ceil(k_pct * n), at least 1 for n > 0.
std::size_t top_count(std::size_t n, double k_pct);

// Indices of the ceil(k_pct * n) largest scores, ordered by descending score;
// among equal scores later indices are taken first.
std::vector<std::size_t> top_fraction(std::span<const double> scores, double k_pct);

struct KCalibration {
  double k_pct = 1.0;
  double share_above_tau = 1.0;
  bool clamped = false;
};

inline constexpr double kDefaultKMin = 0.02;

KCalibration calibrate_k_pct(std::span<const double> validation_scores, double tau,
                             double k_min = kDefaultKMin);

struct CompositeLossValue {
  double total = 0.0;
  double bce_part = 0.0;
  double unfairness_part = 0.0;
  double lambda = 0.0;
  std::size_t selected_s0 = 0;  // scores entering the penalty per group
  std::size_t selected_s1 = 0;
  bool penalty_skipped = false;  // a group had < 2 members after selection
  bool sinkhorn_converged = true;
};

struct CompositeLoss {
  CompositeLossValue value;
  std::vector<double> gradient;  // d(total)/d(score)
};

struct CompositeOptions {
  // When false and lambda == 0 the penalty is not evaluated at all
  // (unfairness_part reported as 0). Training batches use this.
  bool evaluate_penalty_at_zero_lambda = true;
};

CompositeLoss composite_loss(std::span<const double> scores, std::span<const std::uint8_t> labels,
                             std::span<const std::uint8_t> protected_attr, double lambda,
                             const FairnessMode& mode, const SinkhornConfig& cfg,
                             const CompositeOptions& options = {});

}  // namespace dcfair::losses
