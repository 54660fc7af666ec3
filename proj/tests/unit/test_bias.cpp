#include "dcfair/bias.hpp"
#include "dcfair/errors.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace dcfair;

namespace {

data::BiasSpec fast_spec(double rate) {
  data::BiasSpec spec;
  spec.group = 0;
  spec.rate = rate;
  spec.scorer_config.hidden_layers = 2;
  spec.scorer_config.hidden_size = 16;
  spec.seed = 5;
  spec.batch_size = 64;
  spec.max_epochs = 15;
  spec.patience = 5;
  return spec;
}

const data::LabeledDataset& dataset() {
  static const auto ds = oracle::synthetic_dataset({.rows = 300, .width = 3, .seed = 11});
  return ds;
}

std::size_t target_negatives(const data::LabeledDataset& ds, std::uint8_t group) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) n += ds.protected_attr[i] == group && ds.labels[i] == 0;
  return n;
}

}  // namespace

TEST(FlipCount, CeilingRule) {
  EXPECT_EQ(data::flip_count(10, 0.25), 3u);
  EXPECT_EQ(data::flip_count(30, 0.1), 3u);
  EXPECT_EQ(data::flip_count(7, 0.0), 0u);
  EXPECT_EQ(data::flip_count(7, 1.0), 7u);
  EXPECT_EQ(data::flip_count(2544, 0.5), 1272u);
  EXPECT_THROW(data::flip_count(5, 1.5), SpecError);
}

TEST(InjectBias, ZeroRateKeepsLabels) {
  const auto out = data::inject_bias(dataset(), fast_spec(0.0));
  EXPECT_EQ(out.labels, dataset().labels);
}

TEST(InjectBias, FullRateFlipsEveryTargetNegative) {
  const auto out = data::inject_bias(dataset(), fast_spec(1.0));
  EXPECT_EQ(target_negatives(out, 0), 0u);
  EXPECT_EQ(target_negatives(out, 1), target_negatives(dataset(), 1));
}

TEST(InjectBias, ChangesOnlyTargetNegativesByExactCount) {
  const auto& ds = dataset();
  for (double rate : {0.1, 0.33, 0.5}) {
    const auto out = data::inject_bias(ds, fast_spec(rate));
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (out.labels[i] == ds.labels[i]) continue;
      EXPECT_EQ(ds.protected_attr[i], 0);
      EXPECT_EQ(ds.labels[i], 0);
      EXPECT_EQ(out.labels[i], 1);
      ++flipped;
    }
    EXPECT_EQ(flipped, static_cast<std::size_t>(std::ceil(rate * target_negatives(ds, 0) - 1e-9)));
    EXPECT_TRUE(out.features.isApprox(ds.features));
    EXPECT_EQ(out.protected_attr, ds.protected_attr);
  }
}

TEST(InjectBias, FlipsNestAcrossRates) {
  const auto& ds = dataset();
  std::set<std::size_t> previous;
  for (double rate : {0.2, 0.4, 0.8}) {
    const auto out = data::inject_bias(ds, fast_spec(rate));
    std::set<std::size_t> flipped;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (out.labels[i] != ds.labels[i]) flipped.insert(i);
    for (auto i : previous) EXPECT_TRUE(flipped.count(i));
    previous = flipped;
  }
}

TEST(InjectBias, RankingIsByScoreThenRowId) {
  const auto ranking = data::rank_flip_candidates(dataset(), fast_spec(0.5));
  ASSERT_EQ(ranking.ordered_candidates.size(), target_negatives(dataset(), 0));
  for (std::size_t k = 1; k < ranking.ordered_candidates.size(); ++k) {
    EXPECT_GE(ranking.candidate_scores[k - 1], ranking.candidate_scores[k]);
    if (ranking.candidate_scores[k - 1] == ranking.candidate_scores[k]) {
      EXPECT_LT(dataset().row_ids[ranking.ordered_candidates[k - 1]], dataset().row_ids[ranking.ordered_candidates[k]]);
    }
  }
}

TEST(InjectBias, Errors) {
  EXPECT_THROW(data::inject_bias(dataset(), fast_spec(1.2)), SpecError);
  auto all_positive = dataset();
  for (std::size_t i = 0; i < all_positive.size(); ++i)
    if (all_positive.protected_attr[i] == 0) all_positive.labels[i] = 1;
  EXPECT_THROW(data::inject_bias(all_positive, fast_spec(0.5)), DomainError);
}

TEST(InjectBias, DeterministicGivenSeed) {
  const auto a = data::inject_bias(dataset(), fast_spec(0.3));
  const auto b = data::inject_bias(dataset(), fast_spec(0.3));
  EXPECT_EQ(a.labels, b.labels);
}
