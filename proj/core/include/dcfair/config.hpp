#pragma once

#include "dcfair/bias.hpp"
#include "dcfair/data.hpp"
#include "dcfair/experiment.hpp"
#include "dcfair/losses.hpp"
#include "dcfair/metrics.hpp"
#include "dcfair/model.hpp"
#include "dcfair/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dcfair::config {

struct DatasetConfig {
  std::string name = "dataset";
  std::string path;  // resolved against the config file's directory
  data::DataSchema schema;
};

struct BiasConfig {
  std::uint8_t group = 0;
  std::vector<double> rates;  // inject-bias writes one file per rate
  std::uint64_t seed = 0;
  std::optional<model::MlpConfig> scorer;  // defaults to the experiment's mlp
};

// One experiment, read from a JSON file (schema documented in README.md).
struct ExperimentConfig {
  DatasetConfig dataset;
  std::optional<BiasConfig> bias;
  data::SplitSpec split;
  model::MlpConfig mlp;
  std::optional<experiment::SearchSpace> tune;
  training::TrainConfig train;
  // Decision-centric training without an explicit k_pct calibrates it on a
  // lambda=0 baseline first.
  bool calibrate_k = false;
  losses::SinkhornConfig sinkhorn;
  metrics::GridSpec grid;
  experiment::SweepSpec sweep;
  std::string out_dir = "out";
  std::string source_path;

  void validate() const;  // throws ConfigError before any compute starts
};

ExperimentConfig parse(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load(const std::string& path);

std::string mlp_to_json(const model::MlpConfig& config);
model::MlpConfig mlp_from_json(const std::string& json_text);

data::BiasSpec bias_spec(const ExperimentConfig& config, double rate);

// Dataset after optional bias injection (single rate) and the fixed split.
struct Prepared {
  data::LoadedData loaded;
  data::LabeledDataset dataset;
  data::Splits splits;
  std::optional<double> bias_rate;
  std::size_t flipped = 0;
};

Prepared prepare(const ExperimentConfig& config);

}  // namespace dcfair::config
