#pragma once

#include "dcfair/data.hpp"
#include "dcfair/model.hpp"
#include "dcfair/training.hpp"

#include <cstdint>
#include <vector>

namespace dcfair::data {

// Informed label flipping: negatives of one protected group are ranked by a
// lambda=0 scorer and the top fraction is relabelled positive.
struct BiasSpec {
  std::uint8_t group = 0;
  double rate = 0.0;
  model::MlpConfig scorer_config;
  std::uint64_t seed = 0;
  std::size_t batch_size = 1024;
  int max_epochs = 300;
  int patience = 20;

  void validate() const;  // throws SpecError
};

// Candidate rows (indices into ds) with s == group and y == 0, ordered by
// descending scorer score, ties by ascending row_id.
struct FlipRanking {
  std::vector<std::size_t> ordered_candidates;
  std::vector<double> candidate_scores;
};

FlipRanking rank_flip_candidates(const LabeledDataset& ds, const BiasSpec& spec);

std::size_t flip_count(std::size_t candidates, double rate);

LabeledDataset apply_flips(const LabeledDataset& ds, const FlipRanking& ranking, double rate);

LabeledDataset inject_bias(const LabeledDataset& ds, const BiasSpec& spec);

}  // namespace dcfair::data
