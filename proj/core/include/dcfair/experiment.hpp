#pragma once

#include "dcfair/data.hpp"
#include "dcfair/losses.hpp"
#include "dcfair/metrics.hpp"
#include "dcfair/model.hpp"
#include "dcfair/training.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace dcfair::experiment {

// Runs fn(0..n-1) on up to `jobs` worker threads. Exceptions escaping fn are
// rethrown (first one wins) after all workers finish.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

unsigned default_jobs();

// ---------------------------------------------------------------- grid search

struct SearchSpace {
  std::vector<int> hidden_layers{2, 3, 4};
  std::vector<int> hidden_size{16, 32, 64, 128};
  std::vector<double> dropout_prob{0.0, 0.01, 0.1};
  std::vector<double> l2_weight{0.0, 0.01, 0.05};

  // Cartesian product in grid order (layers, size, dropout, l2 - last varies
  // fastest); learning rate and seed come from `base`.
  std::vector<model::MlpConfig> enumerate(const model::MlpConfig& base) const;
};

struct GridSearchEntry {
  std::size_t grid_index = 0;
  model::MlpConfig config;
  double val_loss = 0.0;
  std::size_t parameter_count = 0;
  int epochs = 0;
  bool ok = true;
};

struct GridSearchResult {
  model::MlpConfig best;
  std::vector<GridSearchEntry> leaderboard;  // grid order
};

// Trains one lambda=0 model per grid point (shared seeds) and picks the
// lowest validation loss; ties go to fewer parameters, then grid order.
GridSearchResult grid_search(const data::LabeledDataset& train_ds, const data::LabeledDataset& val_ds,
                             const SearchSpace& space, const model::MlpConfig& base,
                             const training::TrainConfig& train_config,
                             const losses::SinkhornConfig& sinkhorn = {}, unsigned jobs = 1);

void write_leaderboard_csv(std::ostream& out, const GridSearchResult& result);

// --------------------------------------------------------------------- sweep

struct SweepSpec {
  std::vector<double> lambdas;  // strictly increasing, contains 0
  std::vector<losses::FairnessVariant> modes{losses::FairnessVariant::Global,
                                            losses::FairnessVariant::DecisionCentric};
  double tau = 0.7;
  std::vector<std::uint64_t> seeds{0};
  std::string dataset = "dataset";
  std::optional<double> bias_rate;

  static std::vector<double> default_lambdas();  // 0, 0.05, ..., 0.95
  void validate() const;                         // throws SpecError
};

enum class RunStatus { Ok, Failed };

struct RunRecord {
  std::string dataset;
  std::optional<double> bias_rate;
  double tau = 0.0;
  losses::FairnessVariant mode = losses::FairnessVariant::Global;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> k_pct;
  double auc_pr_tau = 0.0;
  double abpc_tau = 0.0;
  double abcc_tau = 0.0;
  int epochs = 0;
  double wall_s = 0.0;
  RunStatus status = RunStatus::Ok;

  bool baseline() const { return lambda == 0.0; }
  // Stable identifier of the (mode, lambda, seed) cell, e.g.
  // "global_lambda0.2_seed1". Used for resume and curve file names.
  std::string key() const;
};

const std::vector<std::string>& record_columns();
void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(const std::string& path);
// Canonical order: mode, lambda, seed.
void sort_records(std::vector<RunRecord>& records);

struct SweepJob {
  data::Splits splits;
  model::MlpConfig mlp;
  training::TrainConfig train;  // lambda/mode/tau/seed are set per cell
  losses::SinkhornConfig sinkhorn;
  metrics::GridSpec grid;
  SweepSpec spec;
  std::optional<std::string> out_dir;  // journal + curve files when set
  bool resume = false;
  unsigned jobs = 1;
  bool write_curves = true;
};

struct SweepOutcome {
  std::vector<RunRecord> records;  // canonical order, failed cells included
  std::size_t reused = 0;          // cells taken from the journal on resume
  std::size_t trained = 0;         // models fitted in this invocation
};

// Cells are (mode, lambda, seed). The lambda=0 baseline is fitted once per
// seed and recorded under every mode; decision-centric cells reuse the k_pct
// calibrated on that baseline. Finished cells are appended to
// <out_dir>/records.journal.csv as they complete.
SweepOutcome sweep(const SweepJob& job);

// -------------------------------------------------------------------- pareto

enum class FairnessMetric { AbpcTau, AbccTau };
std::string to_string(FairnessMetric metric);

struct ParetoFront {
  FairnessMetric metric = FairnessMetric::AbccTau;
  std::vector<RunRecord> members;  // ascending fairness value
};

double fairness_value(const RunRecord& record, FairnessMetric metric);

// Non-dominated records under (maximize auc_pr_tau, minimize metric). Failed
// records are ignored.
ParetoFront pareto_front(const std::vector<RunRecord>& records, FairnessMetric metric);

// One front per mode present in `records`, in mode order.
std::vector<ParetoFront> pareto_fronts_by_mode(const std::vector<RunRecord>& records,
                                               FairnessMetric metric);

// Writes records.csv and pareto_<metric>.csv (one file per metric present in
// `fronts`, rows grouped by mode).
void emit_report(const std::vector<RunRecord>& records, const std::vector<ParetoFront>& fronts,
                 const std::string& out_dir);

// <key>__pdf_s{0,1}.csv, <key>__cdf_s{0,1}.csv, <key>__pr.csv
void write_curves(const std::string& dir, const std::string& run_key, const metrics::ScoreSet& set,
                  double tau, const metrics::GridSpec& grid);

}  // namespace dcfair::experiment
