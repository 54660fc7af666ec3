#pragma once

#include "dcfair/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dcfair::model {

// Fully connected ReLU network with a sigmoid output unit.
struct MlpConfig {
  int hidden_layers = 2;
  int hidden_size = 64;
  double dropout_prob = 0.0;
  double l2_weight = 0.01;
  double learning_rate = 0.01;
  std::uint64_t init_seed = 0;

  void validate() const;  // throws ConfigError
  // Names of fields whose value lies outside the standard search grid.
  std::vector<std::string> off_grid_fields() const;
  std::size_t parameter_count(std::size_t input_dim) const;

  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

std::string describe(const MlpConfig& config);

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Vector bias;             // fan_out
};

struct MlpParameters {
  std::vector<DenseLayer> layers;
  // Identity of this parameter state; refreshed on every mutation so a
  // forward cache can be matched to the parameters that produced it.
  std::uint64_t stamp = 0;

  std::size_t input_dim() const;
  bool all_finite() const;
  void refresh_stamp();
};

struct MlpGradients {
  std::vector<DenseLayer> layers;
};

struct AdamState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState zeros_like(const MlpParameters& params);
};

// Everything backward() needs from a forward pass.
struct ForwardCache {
  std::uint64_t stamp = 0;
  double l2_weight = 0.0;
  std::vector<Matrix> layer_inputs;   // input to layer l (post-dropout for l > 0)
  std::vector<Matrix> pre_activation; // hidden pre-activations
  std::vector<Matrix> dropout_scale;  // per hidden layer; empty when dropout is off
  Vector scores;
};

struct ForwardResult {
  Vector scores;  // strictly inside (0, 1)
  ForwardCache cache;
};

MlpParameters init_model(std::size_t input_dim, const MlpConfig& config);

ForwardResult forward(const MlpParameters& params, const MlpConfig& config, const Matrix& inputs,
                      bool training, std::uint64_t dropout_seed);

// Evaluation-mode scores without retaining a cache.
Vector predict_scores(const MlpParameters& params, const Matrix& inputs);

// Gradients of (loss + l2_weight * sum ||W||^2 / 2) given dLoss/dScore.
MlpGradients backward(const MlpParameters& params, const ForwardCache& cache, const Vector& upstream);

void adam_step(MlpParameters& params, const MlpGradients& grads, AdamState& state, double learning_rate);

}  // namespace dcfair::model
