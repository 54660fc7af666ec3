#include "dcfair/bias.hpp"

#include "dcfair/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dcfair::data {

void BiasSpec::validate() const {
  if (group > 1) throw SpecError("bias group must be 0 or 1");
  if (!(rate >= 0.0 && rate <= 1.0)) throw SpecError("bias rate must lie in [0, 1]");
  try {
    scorer_config.validate();
  } catch (const Error& e) {
    throw SpecError(std::string("scorer config: ") + e.what());
  }
}

std::size_t flip_count(std::size_t candidates, double rate) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw SpecError("bias rate must lie in [0, 1]");
  // The epsilon keeps products such as 0.1 * 30 from rounding up to 4.
  const double raw = std::ceil(rate * static_cast<double>(candidates) - 1e-9);
  return std::min(candidates, static_cast<std::size_t>(std::max(0.0, raw)));
}

FlipRanking rank_flip_candidates(const LabeledDataset& ds, const BiasSpec& spec) {
  spec.validate();
  ds.validate();
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.protected_attr[i] == spec.group && ds.labels[i] == 0) candidates.push_back(i);
  if (candidates.empty()) throw DomainError("target group has no y=0 rows to flip");

  // The scorer m is fitted on the whole input dataset, which also serves as
  // its early-stopping set.
  model::MlpConfig scorer = spec.scorer_config;
  scorer.init_seed = spec.seed;
  training::TrainConfig tc;
  tc.batch_size = spec.batch_size;
  tc.warmup_epochs = 0;
  tc.max_epochs = spec.max_epochs;
  tc.patience = spec.patience;
  tc.shuffle_seed = spec.seed;
  const auto fitted = training::train(ds, ds, scorer, tc);
  const Vector scores = model::predict_scores(fitted.model.params, ds.features);

  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
    if (scores[static_cast<Eigen::Index>(a)] != scores[static_cast<Eigen::Index>(b)]) {
      return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
    }
    return ds.row_ids[a] < ds.row_ids[b];
  });
  FlipRanking ranking;
  ranking.ordered_candidates = candidates;
  ranking.candidate_scores.reserve(candidates.size());
  for (auto i : candidates) ranking.candidate_scores.push_back(scores[static_cast<Eigen::Index>(i)]);
  return ranking;
}

LabeledDataset apply_flips(const LabeledDataset& ds, const FlipRanking& ranking, double rate) {
  const std::size_t k = flip_count(ranking.ordered_candidates.size(), rate);
  LabeledDataset out = ds;
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = ranking.ordered_candidates[r];
    if (i >= out.size() || out.labels[i] != 0) throw StateError("flip ranking does not match the dataset");
    out.labels[i] = 1;
  }
  return out;
}

LabeledDataset inject_bias(const LabeledDataset& ds, const BiasSpec& spec) {
  spec.validate();
  if (spec.rate == 0.0) {
    // Still enforce the precondition on the target group.
    const bool any = std::any_of(ds.labels.begin(), ds.labels.end(), [&, i = std::size_t{0}](std::uint8_t y) mutable {
      return ds.protected_attr[i++] == spec.group && y == 0;
    });
    if (!any) throw DomainError("target group has no y=0 rows to flip");
    return ds;
  }
  return apply_flips(ds, rank_flip_candidates(ds, spec), spec.rate);
}

}  // namespace dcfair::data
