#pragma once

#include "dcfair/data.hpp"
#include "dcfair/training.hpp"

#include <string>

namespace dcfair::checkpoint {

inline constexpr int kFormatVersion = 1;

// JSON document: {"format": "dcfair-mlp", "version": 1, "input_dim": ...,
// "config": {...}, "layers": [{"rows", "cols", "weight": [row-major],
// "bias": [...]}], "encoder": {...}}. Numbers are written with enough digits
// to round-trip exactly.
struct Checkpoint {
  training::TrainedModel model;
  data::FeatureEncoder encoder;
};

void save(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load(const std::string& path);

std::string to_json_text(const Checkpoint& checkpoint);
Checkpoint from_json_text(const std::string& text);

}  // namespace dcfair::checkpoint
