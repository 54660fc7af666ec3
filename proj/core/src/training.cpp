#include "dcfair/training.hpp"

#include "dcfair/csv.hpp"
#include "dcfair/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <numeric>
#include <ostream>

namespace dcfair::training {

namespace {

constexpr std::uint64_t kShuffleSalt = 0x5348'5546'464cULL;
constexpr std::uint64_t kDropoutSalt = 0x4452'4f50'4f55ULL;

void require_both_groups(const data::LabeledDataset& ds) {
  bool seen[2] = {false, false};
  for (auto s : ds.protected_attr) seen[s ? 1 : 0] = true;
  if (!seen[0] || !seen[1]) throw ConfigError("training data must contain both protected groups");
}

Matrix gather_rows(const Matrix& features, std::span<const std::size_t> idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), features.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(idx[r]));
  return out;
}

[[noreturn]] void diverged(const std::string& what, TrainHistory& history) {
  history.stop_reason = StopReason::Diverged;
  throw TrainingDiverged(what, std::move(history));
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 64) throw ConfigError("batch_size must be >= 64");
  if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be >= 0");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (warmup_epochs >= max_epochs) throw ConfigError("warmup_epochs must be < max_epochs");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("lambda must lie in [0, 1)");
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("tau must lie in [0, 1)");
  if (!(k_min > 0.0 && k_min <= 1.0)) throw ConfigError("k_min must lie in (0, 1]");
  try {
    mode.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::EarlyStop: return "early";
    case StopReason::MaxEpochs: return "max_epochs";
    case StopReason::Diverged: return "diverged";
  }
  return "unknown";
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  csv::write_row(out, {"epoch", "train_loss", "val_loss", "val_bce", "val_unfairness", "skipped_batches", "best"});
  for (const auto& e : history.epochs) {
    csv::write_row(out, {std::to_string(e.epoch), csv::format_number(e.train_loss), csv::format_number(e.val_loss),
                         csv::format_number(e.val_bce), csv::format_number(e.val_unfairness),
                         std::to_string(e.skipped_batches), e.epoch == history.best_epoch ? "1" : "0"});
  }
}

losses::CompositeLossValue validation_loss(const TrainedModel& model, const data::LabeledDataset& ds, double lambda,
                                           const losses::FairnessMode& mode, const losses::SinkhornConfig& sinkhorn) {
  if (ds.width() != model.params.input_dim()) throw ShapeError("dataset width does not match the model");
  const Vector scores = model::predict_scores(model.params, ds.features);
  return losses::composite_loss(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                                ds.labels, ds.protected_attr, lambda, mode, sinkhorn)
      .value;
}

TrainResult train(const data::LabeledDataset& train_ds, const data::LabeledDataset& val_ds,
                  const model::MlpConfig& mlp, const TrainConfig& config, const losses::SinkhornConfig& sinkhorn) {
  config.validate();
  mlp.validate();
  sinkhorn.validate();
  train_ds.validate();
  val_ds.validate();
  if (train_ds.size() == 0 || val_ds.size() == 0) throw ConfigError("training and validation sets must be nonempty");
  if (train_ds.width() != val_ds.width()) throw ShapeError("training and validation widths differ");
  require_both_groups(train_ds);

  TrainedModel current{mlp, model::init_model(train_ds.width(), mlp)};
  auto adam = model::AdamState::zeros_like(current.params);
  TrainResult result{current, {}};
  TrainHistory& history = result.history;
  history.best_val_loss = std::numeric_limits<double>::infinity();

  const losses::CompositeOptions batch_options{.evaluate_penalty_at_zero_lambda = false};
  std::vector<std::size_t> order(train_ds.size());
  std::uint64_t step = 0;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.shuffle_seed, kShuffleSalt, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    const double lambda = epoch <= config.warmup_epochs ? 0.0 : config.lambda;
    EpochRecord record;
    record.epoch = epoch;
    double loss_sum = 0.0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix x = gather_rows(train_ds.features, idx);
      Labels y(idx.size()), s(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        y[r] = train_ds.labels[idx[r]];
        s[r] = train_ds.protected_attr[idx[r]];
      }

      const auto fwd = model::forward(current.params, mlp, x, true, derive_seed(config.shuffle_seed, kDropoutSalt, step++));
      const auto loss = losses::composite_loss(
          std::span<const double>(fwd.scores.data(), static_cast<std::size_t>(fwd.scores.size())), y, s, lambda,
          config.mode, sinkhorn, batch_options);
      if (!std::isfinite(loss.value.total)) {
        history.epochs.push_back(record);
        diverged("non-finite training loss at epoch " + std::to_string(epoch), history);
      }
      if (lambda > 0.0 && loss.value.penalty_skipped) ++record.skipped_batches;
      loss_sum += loss.value.total * static_cast<double>(idx.size());

      const Vector upstream = Eigen::Map<const Vector>(loss.gradient.data(), static_cast<Eigen::Index>(loss.gradient.size()));
      model::adam_step(current.params, model::backward(current.params, fwd.cache, upstream), adam, mlp.learning_rate);
      if (!current.params.all_finite()) {
        history.epochs.push_back(record);
        diverged("non-finite parameters at epoch " + std::to_string(epoch), history);
      }
    }
    record.train_loss = loss_sum / static_cast<double>(order.size());

    const auto val = validation_loss(current, val_ds, config.lambda, config.mode, sinkhorn);
    record.val_loss = val.total;
    record.val_bce = val.bce_part;
    record.val_unfairness = val.unfairness_part;
    history.epochs.push_back(record);
    if (!std::isfinite(val.total)) diverged("non-finite validation loss at epoch " + std::to_string(epoch), history);

    if (val.total < history.best_val_loss) {
      history.best_val_loss = val.total;
      history.best_epoch = epoch;
      result.model = current;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      history.stop_reason = StopReason::EarlyStop;
      return result;
    }
  }
  history.stop_reason = StopReason::MaxEpochs;
  return result;
}

CalibratedTrainResult calibrated_train_from_baseline(const data::LabeledDataset& train_ds,
                                                     const data::LabeledDataset& val_ds, const model::MlpConfig& mlp,
                                                     const TrainConfig& config,
                                                     const losses::SinkhornConfig& sinkhorn, TrainResult baseline) {
  if (config.mode.variant != losses::FairnessVariant::DecisionCentric) {
    throw ConfigError("calibrated training requires the decision-centric mode");
  }
  CalibratedTrainResult out;
  const Vector val_scores = model::predict_scores(baseline.model.params, val_ds.features);
  out.calibration = losses::calibrate_k_pct(
      std::span<const double>(val_scores.data(), static_cast<std::size_t>(val_scores.size())), config.tau,
      config.k_min);
  TrainConfig penalized = config;
  penalized.mode = losses::FairnessMode::decision_centric(out.calibration.k_pct);
  out.penalized = train(train_ds, val_ds, mlp, penalized, sinkhorn);
  out.baseline = std::move(baseline);
  return out;
}

CalibratedTrainResult calibrated_train(const data::LabeledDataset& train_ds, const data::LabeledDataset& val_ds,
                                       const model::MlpConfig& mlp, const TrainConfig& config,
                                       const losses::SinkhornConfig& sinkhorn) {
  TrainConfig base = config;
  base.lambda = 0.0;
  base.mode = losses::FairnessMode::none();
  auto baseline = train(train_ds, val_ds, mlp, base, sinkhorn);
  return calibrated_train_from_baseline(train_ds, val_ds, mlp, config, sinkhorn, std::move(baseline));
}

metrics::ScoreSet predict(const TrainedModel& model, const data::LabeledDataset& ds) {
  if (ds.width() != model.params.input_dim()) throw ShapeError("dataset width does not match the model");
  const Vector scores = model::predict_scores(model.params, ds.features);
  metrics::ScoreSet out;
  out.scores.assign(scores.data(), scores.data() + scores.size());
  out.labels = ds.labels;
  out.protected_attr = ds.protected_attr;
  return out;
}

}  // namespace dcfair::training
