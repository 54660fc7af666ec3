#include "dcfair/experiment.hpp"

#include "dcfair/csv.hpp"
#include "dcfair/errors.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <thread>

namespace dcfair::experiment {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, jobs));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

unsigned default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// ---------------------------------------------------------------- grid search

std::vector<model::MlpConfig> SearchSpace::enumerate(const model::MlpConfig& base) const {
  std::vector<model::MlpConfig> out;
  for (int layers : hidden_layers)
    for (int size : hidden_size)
      for (double dropout : dropout_prob)
        for (double l2 : l2_weight) {
          model::MlpConfig c = base;
          c.hidden_layers = layers;
          c.hidden_size = size;
          c.dropout_prob = dropout;
          c.l2_weight = l2;
          out.push_back(c);
        }
  return out;
}

GridSearchResult grid_search(const data::LabeledDataset& train_ds, const data::LabeledDataset& val_ds,
                             const SearchSpace& space, const model::MlpConfig& base,
                             const training::TrainConfig& train_config, const losses::SinkhornConfig& sinkhorn,
                             unsigned jobs) {
  const auto configs = space.enumerate(base);
  if (configs.empty()) throw ExperimentError("grid search over an empty search space");
  for (const auto& c : configs) c.validate();

  training::TrainConfig tc = train_config;
  tc.lambda = 0.0;
  tc.mode = losses::FairnessMode::none();

  GridSearchResult result;
  result.leaderboard.resize(configs.size());
  parallel_for(configs.size(), jobs, [&](std::size_t i) {
    GridSearchEntry& e = result.leaderboard[i];
    e.grid_index = i;
    e.config = configs[i];
    e.parameter_count = configs[i].parameter_count(train_ds.width());
    try {
      const auto fitted = training::train(train_ds, val_ds, configs[i], tc, sinkhorn);
      e.val_loss = fitted.history.best_val_loss;
      e.epochs = static_cast<int>(fitted.history.epochs.size());
    } catch (const training::TrainingDiverged& d) {
      e.ok = false;
      e.val_loss = std::numeric_limits<double>::quiet_NaN();
      e.epochs = static_cast<int>(d.history().epochs.size());
    }
  });

  const GridSearchEntry* best = nullptr;
  for (const auto& e : result.leaderboard) {
    if (!e.ok) continue;
    if (!best || e.val_loss < best->val_loss ||
        (e.val_loss == best->val_loss && e.parameter_count < best->parameter_count)) {
      best = &e;
    }
  }
  if (!best) throw ExperimentError("every grid-search run diverged");
  result.best = best->config;
  return result;
}

void write_leaderboard_csv(std::ostream& out, const GridSearchResult& result) {
  csv::write_row(out, {"grid_index", "hidden_layers", "hidden_size", "dropout_prob", "l2_weight", "learning_rate",
                       "parameter_count", "epochs", "val_loss", "status", "selected"});
  for (const auto& e : result.leaderboard) {
    csv::write_row(out, {std::to_string(e.grid_index), std::to_string(e.config.hidden_layers),
                         std::to_string(e.config.hidden_size), csv::format_number(e.config.dropout_prob),
                         csv::format_number(e.config.l2_weight), csv::format_number(e.config.learning_rate),
                         std::to_string(e.parameter_count), std::to_string(e.epochs), csv::format_number(e.val_loss),
                         e.ok ? "ok" : "diverged", e.config == result.best ? "1" : "0"});
  }
}

// --------------------------------------------------------------------- sweep

std::vector<double> SweepSpec::default_lambdas() {
  std::vector<double> out;
  for (int i = 0; i < 20; ++i) out.push_back(static_cast<double>(i) / 20.0);
  return out;
}

void SweepSpec::validate() const {
  if (lambdas.empty()) throw SpecError("lambda grid is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0 && lambdas[i] < 1.0)) throw SpecError("lambda values must lie in [0, 1)");
    if (i > 0 && !(lambdas[i] > lambdas[i - 1])) throw SpecError("lambda grid must be strictly increasing");
  }
  if (lambdas.front() != 0.0) throw SpecError("lambda grid must contain the 0 baseline");
  if (modes.empty()) throw SpecError("sweep needs at least one mode");
  std::set<losses::FairnessVariant> seen;
  for (auto m : modes) {
    if (m == losses::FairnessVariant::None) throw SpecError("sweep modes must be global or decision-centric");
    if (!seen.insert(m).second) throw SpecError("duplicate sweep mode");
  }
  if (!(tau >= 0.0 && tau < 1.0)) throw SpecError("tau must lie in [0, 1)");
  if (seeds.empty()) throw SpecError("sweep needs at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw SpecError("duplicate sweep seed");
  }
  if (bias_rate && !(*bias_rate >= 0.0 && *bias_rate <= 1.0)) throw SpecError("bias rate must lie in [0, 1]");
}

std::string RunRecord::key() const {
  return losses::to_string(mode) + "_lambda" + csv::format_number(lambda) + "_seed" + std::to_string(seed);
}

const std::vector<std::string>& record_columns() {
  static const std::vector<std::string> columns{"dataset", "bias_rate", "tau",     "mode",     "lambda",
                                                "seed",    "k_pct",     "auc_pr_tau", "abpc_tau", "abcc_tau",
                                                "epochs",  "wall_s",    "status"};
  return columns;
}

namespace {

std::string optional_number(const std::optional<double>& v) { return v ? csv::format_number(*v) : std::string(); }

std::vector<std::string> record_fields(const RunRecord& r) {
  return {r.dataset,
          optional_number(r.bias_rate),
          csv::format_number(r.tau),
          losses::to_string(r.mode),
          csv::format_number(r.lambda),
          std::to_string(r.seed),
          optional_number(r.k_pct),
          csv::format_number(r.auc_pr_tau),
          csv::format_number(r.abpc_tau),
          csv::format_number(r.abcc_tau),
          std::to_string(r.epochs),
          csv::format_number(r.wall_s),
          r.status == RunStatus::Ok ? "ok" : "failed"};
}

double require_number(const std::string& cell, const char* column) {
  if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
  const auto v = csv::parse_number(cell);
  if (!v) throw IoError(std::string("records: bad value in column ") + column + ": '" + cell + "'");
  return *v;
}

std::optional<double> optional_cell(const std::string& cell, const char* column) {
  if (cell.empty()) return std::nullopt;
  return require_number(cell, column);
}

bool record_less(const RunRecord& a, const RunRecord& b) {
  if (a.mode != b.mode) return a.mode < b.mode;
  if (a.lambda != b.lambda) return a.lambda < b.lambda;
  return a.seed < b.seed;
}

// Serializes appends to the resume journal.
class Journal {
 public:
  Journal(const fs::path& path, bool keep_existing) : path_(path) {
    const bool exists = keep_existing && fs::exists(path);
    out_.open(path, exists ? std::ios::app : std::ios::trunc);
    if (!out_) throw IoError("cannot open journal " + path.string());
    if (!exists) {
      csv::write_row(out_, record_columns());
      out_.flush();
    }
  }

  void append(const RunRecord& record) {
    std::lock_guard lock(mutex_);
    csv::write_row(out_, record_fields(record));
    out_.flush();
  }

 private:
  fs::path path_;
  std::ofstream out_;
  std::mutex mutex_;
};

struct CellResult {
  metrics::MetricReport report;
  int epochs = 0;
  double wall_s = 0.0;
};

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  csv::write_row(out, record_columns());
  for (const auto& r : records) csv::write_row(out, record_fields(r));
}

std::vector<RunRecord> read_records_csv(const std::string& path) {
  const csv::Table table = csv::read_file(path);
  std::vector<std::size_t> col;
  for (const auto& name : record_columns()) col.push_back(table.column(name));
  std::vector<RunRecord> out;
  for (const auto& row : table.rows) {
    RunRecord r;
    r.dataset = row[col[0]];
    r.bias_rate = optional_cell(row[col[1]], "bias_rate");
    r.tau = require_number(row[col[2]], "tau");
    r.mode = losses::parse_variant(row[col[3]]);
    r.lambda = require_number(row[col[4]], "lambda");
    r.seed = std::stoull(row[col[5]]);
    r.k_pct = optional_cell(row[col[6]], "k_pct");
    r.auc_pr_tau = require_number(row[col[7]], "auc_pr_tau");
    r.abpc_tau = require_number(row[col[8]], "abpc_tau");
    r.abcc_tau = require_number(row[col[9]], "abcc_tau");
    r.epochs = std::stoi(row[col[10]]);
    r.wall_s = require_number(row[col[11]], "wall_s");
    if (row[col[12]] == "ok") {
      r.status = RunStatus::Ok;
    } else if (row[col[12]] == "failed") {
      r.status = RunStatus::Failed;
    } else {
      throw IoError("records: unknown status '" + row[col[12]] + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

void sort_records(std::vector<RunRecord>& records) { std::stable_sort(records.begin(), records.end(), record_less); }

SweepOutcome sweep(const SweepJob& job) {
  job.spec.validate();
  job.mlp.validate();
  job.sinkhorn.validate();
  job.grid.validate();
  {
    training::TrainConfig probe = job.train;
    probe.lambda = 0.0;
    probe.mode = losses::FairnessMode::none();
    probe.tau = job.spec.tau;
    probe.validate();
  }
  const auto& spec = job.spec;
  const bool want_dc = std::find(spec.modes.begin(), spec.modes.end(), losses::FairnessVariant::DecisionCentric) !=
                       spec.modes.end();

  std::map<std::string, RunRecord> done;
  std::optional<Journal> journal;
  fs::path curve_dir;
  if (job.out_dir) {
    fs::create_directories(*job.out_dir);
    const fs::path journal_path = fs::path(*job.out_dir) / "records.journal.csv";
    if (job.resume && fs::exists(journal_path)) {
      for (auto& r : read_records_csv(journal_path.string())) {
        if (r.status == RunStatus::Ok) done[r.key()] = r;
      }
    }
    journal.emplace(journal_path, job.resume);
    if (job.write_curves) {
      curve_dir = fs::path(*job.out_dir) / "curves";
      fs::create_directories(curve_dir);
    }
  }

  auto make_record = [&](losses::FairnessVariant mode, double lambda, std::uint64_t seed) {
    RunRecord r;
    r.dataset = spec.dataset;
    r.bias_rate = spec.bias_rate;
    r.tau = spec.tau;
    r.mode = mode;
    r.lambda = lambda;
    r.seed = seed;
    return r;
  };
  auto fill = [](RunRecord& r, const CellResult& c) {
    r.auc_pr_tau = c.report.auc_pr_tau;
    r.abpc_tau = c.report.abpc_tau;
    r.abcc_tau = c.report.abcc_tau;
    r.epochs = c.epochs;
    r.wall_s = c.wall_s;
  };
  auto fail = [](RunRecord& r) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    r.auc_pr_tau = r.abpc_tau = r.abcc_tau = nan;
    r.status = RunStatus::Failed;
  };
  auto cell_config = [&](double lambda, const losses::FairnessMode& mode, std::uint64_t seed) {
    training::TrainConfig tc = job.train;
    tc.lambda = lambda;
    tc.mode = mode;
    tc.tau = spec.tau;
    tc.shuffle_seed = seed;
    return tc;
  };
  auto seeded_mlp = [&](std::uint64_t seed) {
    model::MlpConfig m = job.mlp;
    m.init_seed = seed;
    return m;
  };

  std::mutex results_mutex;
  std::vector<RunRecord> fresh;
  std::atomic<std::size_t> trained{0};
  auto publish = [&](const RunRecord& r, const metrics::ScoreSet* scores) {
    if (scores && r.status == RunStatus::Ok && !curve_dir.empty()) {
      write_curves(curve_dir.string(), r.key(), *scores, spec.tau, job.grid);
    }
    if (journal) journal->append(r);
    std::lock_guard lock(results_mutex);
    fresh.push_back(r);
  };

  // Phase 1: one lambda=0 baseline per seed, recorded under every mode. The
  // decision-centric baseline record carries the calibrated k_pct.
  std::map<std::uint64_t, double> k_by_seed;
  for (auto seed : spec.seeds) {
    const auto it = done.find(make_record(losses::FairnessVariant::DecisionCentric, 0.0, seed).key());
    if (it != done.end() && it->second.k_pct) k_by_seed[seed] = *it->second.k_pct;
  }
  std::vector<std::uint64_t> baseline_seeds;
  for (auto seed : spec.seeds) {
    bool missing = want_dc && !k_by_seed.count(seed);
    for (auto mode : spec.modes) missing = missing || !done.count(make_record(mode, 0.0, seed).key());
    if (missing) baseline_seeds.push_back(seed);
  }
  parallel_for(baseline_seeds.size(), job.jobs, [&](std::size_t i) {
    const std::uint64_t seed = baseline_seeds[i];
    std::vector<RunRecord> records;
    for (auto mode : spec.modes) records.push_back(make_record(mode, 0.0, seed));
    metrics::ScoreSet scores;
    try {
      const auto t0 = std::chrono::steady_clock::now();
      const auto fitted = training::train(job.splits.train, job.splits.validation, seeded_mlp(seed),
                                          cell_config(0.0, losses::FairnessMode::none(), seed), job.sinkhorn);
      ++trained;
      std::optional<double> k;
      if (want_dc) {
        const Vector val = model::predict_scores(fitted.model.params, job.splits.validation.features);
        k = losses::calibrate_k_pct(std::span<const double>(val.data(), static_cast<std::size_t>(val.size())),
                                    spec.tau, job.train.k_min)
                .k_pct;
      }
      scores = training::predict(fitted.model, job.splits.test);
      CellResult c;
      c.report = metrics::evaluate(scores, spec.tau, job.grid);
      c.epochs = static_cast<int>(fitted.history.epochs.size());
      c.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      for (auto& r : records) {
        fill(r, c);
        if (r.mode == losses::FairnessVariant::DecisionCentric) r.k_pct = k;
      }
      if (k) {
        std::lock_guard lock(results_mutex);
        k_by_seed[seed] = *k;
      }
    } catch (const std::exception&) {
      for (auto& r : records) fail(r);
    }
    for (const auto& r : records) {
      if (!done.count(r.key())) publish(r, &scores);
    }
  });

  // Phase 2: penalized cells.
  struct Cell {
    losses::FairnessVariant mode;
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto seed : spec.seeds)
    for (auto mode : spec.modes)
      for (double lambda : spec.lambdas) {
        if (lambda == 0.0 || done.count(make_record(mode, lambda, seed).key())) continue;
        cells.push_back({mode, lambda, seed});
      }
  parallel_for(cells.size(), job.jobs, [&](std::size_t i) {
    const Cell& cell = cells[i];
    RunRecord r = make_record(cell.mode, cell.lambda, cell.seed);
    metrics::ScoreSet scores;
    try {
      losses::FairnessMode mode = losses::FairnessMode::global();
      if (cell.mode == losses::FairnessVariant::DecisionCentric) {
        double k = 0.0;
        {
          std::lock_guard lock(results_mutex);
          const auto it = k_by_seed.find(cell.seed);
          if (it == k_by_seed.end()) throw ExperimentError("no calibrated k_pct: the baseline for this seed failed");
          k = it->second;
        }
        mode = losses::FairnessMode::decision_centric(k);
        r.k_pct = k;
      }
      const auto t0 = std::chrono::steady_clock::now();
      const auto fitted = training::train(job.splits.train, job.splits.validation, seeded_mlp(cell.seed),
                                          cell_config(cell.lambda, mode, cell.seed), job.sinkhorn);
      ++trained;
      scores = training::predict(fitted.model, job.splits.test);
      CellResult c;
      c.report = metrics::evaluate(scores, spec.tau, job.grid);
      c.epochs = static_cast<int>(fitted.history.epochs.size());
      c.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      fill(r, c);
    } catch (const std::exception&) {
      fail(r);
    }
    publish(r, &scores);
  });

  SweepOutcome outcome;
  outcome.reused = done.size();
  outcome.trained = trained.load();
  for (auto& [key, r] : done) outcome.records.push_back(r);
  for (auto& r : fresh) outcome.records.push_back(r);
  sort_records(outcome.records);
  return outcome;
}

// -------------------------------------------------------------------- pareto

std::string to_string(FairnessMetric metric) {
  return metric == FairnessMetric::AbpcTau ? "abpc_tau" : "abcc_tau";
}

double fairness_value(const RunRecord& record, FairnessMetric metric) {
  return metric == FairnessMetric::AbpcTau ? record.abpc_tau : record.abcc_tau;
}

ParetoFront pareto_front(const std::vector<RunRecord>& records, FairnessMetric metric) {
  std::vector<const RunRecord*> ok;
  for (const auto& r : records)
    if (r.status == RunStatus::Ok) ok.push_back(&r);
  // Ascending fairness, then descending performance.
  std::stable_sort(ok.begin(), ok.end(), [metric](const RunRecord* a, const RunRecord* b) {
    const double fa = fairness_value(*a, metric), fb = fairness_value(*b, metric);
    if (fa != fb) return fa < fb;
    return a->auc_pr_tau > b->auc_pr_tau;
  });

  ParetoFront front;
  front.metric = metric;
  double best_before = -std::numeric_limits<double>::infinity();  // max perf at strictly smaller fairness
  for (std::size_t i = 0; i < ok.size();) {
    std::size_t j = i;
    const double f = fairness_value(*ok[i], metric);
    while (j < ok.size() && fairness_value(*ok[j], metric) == f) ++j;
    const double group_best = ok[i]->auc_pr_tau;  // group is sorted by perf descending
    for (std::size_t k = i; k < j; ++k) {
      const double p = ok[k]->auc_pr_tau;
      if (best_before >= p || group_best > p) continue;
      front.members.push_back(*ok[k]);
    }
    best_before = std::max(best_before, group_best);
    i = j;
  }
  return front;
}

std::vector<ParetoFront> pareto_fronts_by_mode(const std::vector<RunRecord>& records, FairnessMetric metric) {
  std::vector<ParetoFront> out;
  for (auto mode : {losses::FairnessVariant::None, losses::FairnessVariant::Global,
                    losses::FairnessVariant::DecisionCentric}) {
    std::vector<RunRecord> subset;
    for (const auto& r : records)
      if (r.mode == mode) subset.push_back(r);
    if (!subset.empty()) out.push_back(pareto_front(subset, metric));
  }
  return out;
}

void emit_report(const std::vector<RunRecord>& records, const std::vector<ParetoFront>& fronts,
                 const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

  auto open = [&](const std::string& name) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (fs::path(out_dir) / name).string());
    return out;
  };

  std::vector<RunRecord> sorted = records;
  sort_records(sorted);
  {
    auto out = open("records.csv");
    write_records_csv(out, sorted);
  }
  for (FairnessMetric metric : {FairnessMetric::AbpcTau, FairnessMetric::AbccTau}) {
    std::vector<RunRecord> rows;
    bool present = false;
    for (const auto& f : fronts) {
      if (f.metric != metric) continue;
      present = true;
      rows.insert(rows.end(), f.members.begin(), f.members.end());
    }
    if (!present) continue;
    auto out = open("pareto_" + to_string(metric) + ".csv");
    write_records_csv(out, rows);
  }
}

void write_curves(const std::string& dir, const std::string& run_key, const metrics::ScoreSet& set, double tau,
                  const metrics::GridSpec& grid) {
  fs::create_directories(dir);
  auto open = [&](const std::string& suffix) {
    const fs::path path = fs::path(dir) / (run_key + suffix);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
  };
  const auto points = grid.grid();
  for (std::uint8_t s = 0; s < 2; ++s) {
    const auto group = set.group_scores(s);
    if (group.empty()) continue;
    const std::string tag = "_s" + std::to_string(s) + ".csv";
    {
      const auto density = metrics::kde_pdf(group, grid);
      auto out = open("__pdf" + tag);
      csv::write_row(out, {"score", "density"});
      for (std::size_t k = 0; k < density.grid.size(); ++k) {
        csv::write_row(out, {csv::format_number(density.grid[k]), csv::format_number(density.values[k])});
      }
    }
    {
      const metrics::Ecdf ecdf(group);
      auto out = open("__cdf" + tag);
      csv::write_row(out, {"score", "cdf"});
      for (double x : points) csv::write_row(out, {csv::format_number(x), csv::format_number(ecdf(x))});
    }
  }
  auto out = open("__pr.csv");
  csv::write_row(out, {"threshold", "precision", "recall"});
  if (std::count(set.labels.begin(), set.labels.end(), std::uint8_t{1}) == 0) return;
  for (const auto& p : metrics::partial_pr_curve(set, tau).points) {
    csv::write_row(out, {csv::format_number(p.threshold), csv::format_number(p.precision), csv::format_number(p.recall)});
  }
}

}  // namespace dcfair::experiment
