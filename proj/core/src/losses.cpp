#include "dcfair/losses.hpp"

#include "dcfair/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace dcfair::losses {

void FairnessMode::validate() const {
  if (variant == FairnessVariant::DecisionCentric && !(k_pct > 0.0 && k_pct <= 1.0)) {
    throw SpecError("decision-centric k_pct must lie in (0, 1]");
  }
}

std::string to_string(FairnessVariant variant) {
  switch (variant) {
    case FairnessVariant::None: return "none";
    case FairnessVariant::Global: return "global";
    case FairnessVariant::DecisionCentric: return "decision-centric";
  }
  return "none";
}

FairnessVariant parse_variant(const std::string& text) {
  if (text == "none") return FairnessVariant::None;
  if (text == "global") return FairnessVariant::Global;
  if (text == "decision-centric" || text == "decision_centric" || text == "dc") {
    return FairnessVariant::DecisionCentric;
  }
  throw ConfigError("unknown fairness mode '" + text + "' (expected none|global|decision-centric)");
}

BceResult bce(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.empty()) throw DomainError("bce on empty batch");
  if (scores.size() != labels.size()) throw ShapeError("bce: scores and labels differ in length");
  BceResult out;
  out.gradient.resize(scores.size());
  const double inv_n = 1.0 / static_cast<double>(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], kBceClamp, 1.0 - kBceClamp);
    if (labels[i]) {
      sum -= std::log(p);
      out.gradient[i] = -inv_n / p;
    } else {
      sum -= std::log1p(-p);
      out.gradient[i] = inv_n / (1.0 - p);
    }
  }
  out.loss = sum * inv_n;
  return out;
}

double exact_w1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("exact_w1 needs two nonempty samples");
  std::vector<double> qa(a.begin(), a.end()), qb(b.begin(), b.end());
  std::sort(qa.begin(), qa.end());
  std::sort(qb.begin(), qb.end());
  // Quantile functions are constant on (i/n, (i+1)/n]; walk the merged
  // breakpoints in units of 1/(n m) to keep the partition exact.
  const std::size_t n = qa.size();
  const std::size_t m = qb.size();
  const double unit = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  std::size_t i = 0, j = 0, prev = 0;
  double total = 0.0;
  while (i < n && j < m) {
    const std::size_t end_a = (i + 1) * m;
    const std::size_t end_b = (j + 1) * n;
    const std::size_t next = std::min(end_a, end_b);
    total += std::abs(qa[i] - qb[j]) * static_cast<double>(next - prev);
    prev = next;
    if (end_a == next) ++i;
    if (end_b == next) ++j;
  }
  return total * unit;
}

std::size_t top_count(std::size_t n, double k_pct) {
  if (n == 0) return 0;
  const double raw = std::ceil(k_pct * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n);
}

std::vector<std::size_t> top_fraction(std::span<const double> scores, double k_pct) {
  if (scores.empty()) throw DomainError("top_fraction on empty sample");
  if (!(k_pct > 0.0 && k_pct <= 1.0)) throw SpecError("top_fraction k_pct must lie in (0, 1]");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t k = top_count(scores.size(), k_pct);
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t i, std::size_t j) {
                      if (scores[i] != scores[j]) return scores[i] > scores[j];
                      return i > j;
                    });
  idx.resize(k);
  return idx;
}

KCalibration calibrate_k_pct(std::span<const double> validation_scores, double tau, double k_min) {
  if (validation_scores.empty()) throw DomainError("calibrate_k_pct on empty validation scores");
  if (!(tau >= 0.0 && tau < 1.0)) throw SpecError("tau must lie in [0, 1)");
  if (!(k_min > 0.0 && k_min <= 1.0)) throw SpecError("k_min must lie in (0, 1]");
  const auto above = std::count_if(validation_scores.begin(), validation_scores.end(),
                                   [tau](double s) { return s >= tau; });
  KCalibration out;
  out.share_above_tau = static_cast<double>(above) / static_cast<double>(validation_scores.size());
  out.clamped = out.share_above_tau < k_min;
  out.k_pct = std::clamp(out.share_above_tau, k_min, 1.0);
  return out;
}

CompositeLoss composite_loss(std::span<const double> scores, std::span<const std::uint8_t> labels,
                             std::span<const std::uint8_t> protected_attr, double lambda, const FairnessMode& mode,
                             const SinkhornConfig& cfg, const CompositeOptions& options) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw SpecError("lambda must lie in [0, 1)");
  if (protected_attr.size() != scores.size()) throw ShapeError("composite_loss: protected attribute length");
  mode.validate();

  const BceResult base = bce(scores, labels);
  CompositeLoss out;
  out.value.lambda = lambda;
  out.value.bce_part = base.loss;
  out.gradient.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.gradient[i] = (1.0 - lambda) * base.gradient[i];

  const bool penalize = mode.variant != FairnessVariant::None &&
                        (lambda > 0.0 || options.evaluate_penalty_at_zero_lambda);
  if (penalize) {
    std::array<std::vector<std::size_t>, 2> members;
    for (std::size_t i = 0; i < scores.size(); ++i) members[protected_attr[i] ? 1 : 0].push_back(i);

    std::array<std::vector<std::size_t>, 2> selected;
    for (int s = 0; s < 2; ++s) {
      if (members[s].empty()) continue;
      if (mode.variant == FairnessVariant::Global) {
        selected[s] = members[s];
        continue;
      }
      std::vector<double> group(members[s].size());
      for (std::size_t i = 0; i < group.size(); ++i) group[i] = scores[members[s][i]];
      for (std::size_t local : top_fraction(group, mode.k_pct)) selected[s].push_back(members[s][local]);
      // Batch order, so that k_pct = 1 reproduces the global penalty exactly.
      std::sort(selected[s].begin(), selected[s].end());
    }
    out.value.selected_s0 = selected[0].size();
    out.value.selected_s1 = selected[1].size();

    if (selected[0].size() < 2 || selected[1].size() < 2) {
      out.value.penalty_skipped = true;
    } else {
      std::vector<double> a(selected[0].size()), b(selected[1].size());
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = scores[selected[0][i]];
      for (std::size_t j = 0; j < b.size(); ++j) b[j] = scores[selected[1][j]];
      const SinkhornResult ot = sinkhorn_w1(a, b, cfg);
      out.value.unfairness_part = ot.regularized;
      out.value.sinkhorn_converged = ot.converged;
      for (std::size_t i = 0; i < a.size(); ++i) out.gradient[selected[0][i]] += lambda * ot.grad_a[i];
      for (std::size_t j = 0; j < b.size(); ++j) out.gradient[selected[1][j]] += lambda * ot.grad_b[j];
    }
  }
  out.value.total = (1.0 - lambda) * out.value.bce_part + lambda * out.value.unfairness_part;
  return out;
}

}  // namespace dcfair::losses
