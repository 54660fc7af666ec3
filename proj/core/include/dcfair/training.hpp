#pragma once

#include "dcfair/data.hpp"
#include "dcfair/errors.hpp"
#include "dcfair/losses.hpp"
#include "dcfair/metrics.hpp"
#include "dcfair/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dcfair::training {

struct TrainConfig {
  std::size_t batch_size = 1024;
  int warmup_epochs = 15;
  int patience = 20;
  int max_epochs = 300;
  double lambda = 0.0;
  losses::FairnessMode mode;
  double tau = 0.7;
  std::uint64_t shuffle_seed = 0;
  double k_min = losses::kDefaultKMin;

  void validate() const;  // throws ConfigError
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_bce = 0.0;
  double val_unfairness = 0.0;
  std::size_t skipped_batches = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

enum class StopReason { EarlyStop, MaxEpochs, Diverged };
std::string to_string(StopReason reason);

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  StopReason stop_reason = StopReason::MaxEpochs;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

void write_history_csv(std::ostream& out, const TrainHistory& history);

struct TrainedModel {
  model::MlpConfig config;
  model::MlpParameters params;
};

struct TrainResult {
  TrainedModel model;
  TrainHistory history;
};

// Non-finite loss during training; carries the history up to the failure.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, TrainHistory history)
      : Error(what), history_(std::move(history)) {}
  const TrainHistory& history() const { return history_; }

 private:
  TrainHistory history_;
};

TrainResult train(const data::LabeledDataset& train_ds, const data::LabeledDataset& val_ds,
                  const model::MlpConfig& mlp, const TrainConfig& config,
                  const losses::SinkhornConfig& sinkhorn = {});

struct CalibratedTrainResult {
  TrainResult baseline;
  TrainResult penalized;
  losses::KCalibration calibration;
};

// Trains a lambda=0 baseline with the same seeds, calibrates k_pct on its
// validation scores at config.tau, then trains the decision-centric model.
CalibratedTrainResult calibrated_train(const data::LabeledDataset& train_ds,
                                       const data::LabeledDataset& val_ds,
                                       const model::MlpConfig& mlp, const TrainConfig& config,
                                       const losses::SinkhornConfig& sinkhorn = {});

// Second half of calibrated_train when the baseline already exists.
CalibratedTrainResult calibrated_train_from_baseline(const data::LabeledDataset& train_ds,
                                                     const data::LabeledDataset& val_ds,
                                                     const model::MlpConfig& mlp,
                                                     const TrainConfig& config,
                                                     const losses::SinkhornConfig& sinkhorn,
                                                     TrainResult baseline);

metrics::ScoreSet predict(const TrainedModel& model, const data::LabeledDataset& ds);

// Full-set composite loss in evaluation mode; the quantity tracked for
// early stopping.
losses::CompositeLossValue validation_loss(const TrainedModel& model, const data::LabeledDataset& ds,
                                           double lambda, const losses::FairnessMode& mode,
                                           const losses::SinkhornConfig& sinkhorn);

}  // namespace dcfair::training
