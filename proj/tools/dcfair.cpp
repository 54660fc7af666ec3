// dcfair: command-line front end.
//
//   dcfair inject-bias --config exp.json
//   dcfair tune        --config exp.json [--jobs N]
//   dcfair train       --config exp.json [--lambda L] [--mode M] [--seed S]
//   dcfair sweep       --config exp.json [--jobs N] [--resume]
//   dcfair evaluate    --config exp.json [--model out/model.json] [--data file.csv]
//   dcfair pareto      --out dir [--records dir/records.csv]
//
// Exit status: 0 success, 1 some sweep cells failed, 2 usage or config error,
// 3 runtime error.

#include "dcfair/bias.hpp"
#include "dcfair/checkpoint.hpp"
#include "dcfair/config.hpp"
#include "dcfair/csv.hpp"
#include "dcfair/errors.hpp"
#include "dcfair/experiment.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <fmt/ranges.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace dcfair;

namespace {

struct Options {
  std::string config_path;
  std::optional<double> tau;
  std::optional<double> lambda;
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  unsigned jobs = experiment::default_jobs();
  bool resume = false;
  std::optional<std::string> out;
  std::optional<std::string> model_path;
  std::optional<std::string> data_path;
  std::optional<std::string> records_path;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

config::ExperimentConfig load_config(const Options& o) {
  if (o.config_path.empty()) throw ConfigError("--config is required for this command");
  auto c = config::load(o.config_path);
  if (o.tau) {
    c.train.tau = *o.tau;
    c.sweep.tau = *o.tau;
  }
  if (o.lambda) c.train.lambda = *o.lambda;
  if (o.mode) {
    c.train.mode.variant = losses::parse_variant(*o.mode);
    c.calibrate_k = c.train.mode.variant == losses::FairnessVariant::DecisionCentric;
  }
  if (o.seed) {
    c.mlp.init_seed = *o.seed;
    c.train.shuffle_seed = *o.seed;
    c.sweep.seeds = {*o.seed};
  }
  if (o.out) c.out_dir = *o.out;
  c.validate();
  if (const auto off = c.mlp.off_grid_fields(); !off.empty()) {
    spdlog::warn("mlp uses values outside the standard search grid: {}", fmt::join(off, ", "));
  }
  fs::create_directories(c.out_dir);
  return c;
}

void write_table_keys(std::ostream& out, const data::LabeledDataset& ds) {
  const auto t = data::group_label_table(ds);
  for (int s = 0; s < 2; ++s)
    for (int y = 0; y < 2; ++y) out << "share_s" << s << "_y" << y << '=' << csv::format_number(t[s][y]) << '\n';
}

int cmd_inject_bias(const Options& o) {
  const auto c = load_config(o);
  if (!c.bias) throw ConfigError("inject-bias needs a 'bias' section");
  auto loaded = data::load_csv(c.dataset.path, c.dataset.schema);
  spdlog::info("{}", loaded.report.summary());

  std::optional<data::FlipRanking> ranking;
  for (double rate : c.bias->rates) {
    const auto spec = config::bias_spec(c, rate);
    data::LabeledDataset biased = loaded.dataset;
    std::size_t candidates = 0, flipped = 0;
    if (rate > 0.0) {
      // One ranking serves every rate, so lower-rate flips nest in higher ones.
      if (!ranking) ranking = data::rank_flip_candidates(loaded.dataset, spec);
      candidates = ranking->ordered_candidates.size();
      flipped = data::flip_count(candidates, rate);
      biased = data::apply_flips(loaded.dataset, *ranking, rate);
    } else {
      biased = data::inject_bias(loaded.dataset, spec);
      for (std::size_t i = 0; i < biased.size(); ++i)
        candidates += biased.protected_attr[i] == spec.group && biased.labels[i] == 0;
    }
    const std::string stem = c.dataset.name + "_bias" + csv::format_number(rate);
    const fs::path csv_path = fs::path(c.out_dir) / (stem + ".csv");
    data::write_dataset_csv(csv_path.string(), loaded, biased);

    auto report = open_out(fs::path(c.out_dir) / (stem + ".report.txt"));
    report << "dataset=" << c.dataset.name << '\n'
           << "rate=" << csv::format_number(rate) << '\n'
           << "group=" << int(spec.group) << '\n'
           << "rows=" << biased.size() << '\n'
           << "candidates=" << candidates << '\n'
           << "flipped=" << flipped << '\n';
    std::size_t positives = 0;
    for (auto y : biased.labels) positives += y;
    report << "positive_share=" << csv::format_number(static_cast<double>(positives) / static_cast<double>(biased.size()))
           << '\n';
    write_table_keys(report, biased);
    spdlog::info("rate {}: flipped {} of {} candidates -> {}", rate, flipped, candidates, csv_path.string());
  }
  return 0;
}

int cmd_tune(const Options& o) {
  const auto c = load_config(o);
  const auto prepared = config::prepare(c);
  const experiment::SearchSpace space = c.tune.value_or(experiment::SearchSpace{});
  spdlog::info("grid search over {} configs with {} jobs", space.enumerate(c.mlp).size(), o.jobs);
  const auto result = experiment::grid_search(prepared.splits.train, prepared.splits.validation, space, c.mlp, c.train,
                                              c.sinkhorn, o.jobs);
  {
    auto out = open_out(fs::path(c.out_dir) / "leaderboard.csv");
    experiment::write_leaderboard_csv(out, result);
  }
  auto out = open_out(fs::path(c.out_dir) / "best_mlp.json");
  out << config::mlp_to_json(result.best);
  spdlog::info("best: {}", model::describe(result.best));
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = load_config(o);
  const auto prepared = config::prepare(c);
  const auto& sp = prepared.splits;
  const fs::path dir = c.out_dir;

  training::TrainResult result;
  std::optional<losses::KCalibration> calibration;
  if (c.calibrate_k) {
    auto calibrated = training::calibrated_train(sp.train, sp.validation, c.mlp, c.train, c.sinkhorn);
    calibration = calibrated.calibration;
    if (calibration->clamped) spdlog::warn("no baseline validation score reaches tau; k_pct clamped to {}", calibration->k_pct);
    auto out = open_out(dir / "history_baseline.csv");
    training::write_history_csv(out, calibrated.baseline.history);
    result = std::move(calibrated.penalized);
  } else {
    result = training::train(sp.train, sp.validation, c.mlp, c.train, c.sinkhorn);
  }

  checkpoint::save((dir / "model.json").string(), {result.model, prepared.loaded.encoder});
  {
    auto out = open_out(dir / "history.csv");
    training::write_history_csv(out, result.history);
  }
  const auto report = metrics::evaluate(training::predict(result.model, sp.test), c.train.tau, c.grid);
  {
    auto out = open_out(dir / "metrics.txt");
    out << metrics::to_key_value(report);
  }
  auto out = open_out(dir / "summary.txt");
  out << "lambda=" << csv::format_number(c.train.lambda) << '\n'
      << "mode=" << losses::to_string(c.train.mode.variant) << '\n';
  if (calibration) {
    out << "k_pct=" << csv::format_number(calibration->k_pct) << '\n'
        << "k_pct_clamped=" << (calibration->clamped ? 1 : 0) << '\n';
  } else if (c.train.mode.variant == losses::FairnessVariant::DecisionCentric) {
    out << "k_pct=" << csv::format_number(c.train.mode.k_pct) << '\n';
  }
  out << "epochs=" << result.history.epochs.size() << '\n'
      << "best_epoch=" << result.history.best_epoch << '\n'
      << "best_val_loss=" << csv::format_number(result.history.best_val_loss) << '\n'
      << "stop_reason=" << training::to_string(result.history.stop_reason) << '\n'
      << "flipped=" << prepared.flipped << '\n';
  spdlog::info("stopped ({}) after {} epochs; test auc_pr_tau={} abcc_tau={}", training::to_string(result.history.stop_reason),
               result.history.epochs.size(), report.auc_pr_tau, report.abcc_tau);
  return 0;
}

void write_failures(const fs::path& dir, const std::vector<experiment::RunRecord>& records) {
  std::vector<experiment::RunRecord> failed;
  for (const auto& r : records)
    if (r.status == experiment::RunStatus::Failed) failed.push_back(r);
  const fs::path path = dir / "failures.csv";
  if (failed.empty()) {
    fs::remove(path);
    return;
  }
  auto out = open_out(path);
  experiment::write_records_csv(out, failed);
}

std::vector<experiment::ParetoFront> all_fronts(const std::vector<experiment::RunRecord>& records) {
  auto fronts = experiment::pareto_fronts_by_mode(records, experiment::FairnessMetric::AbpcTau);
  auto abcc = experiment::pareto_fronts_by_mode(records, experiment::FairnessMetric::AbccTau);
  fronts.insert(fronts.end(), abcc.begin(), abcc.end());
  return fronts;
}

int cmd_sweep(const Options& o) {
  const auto c = load_config(o);
  const auto prepared = config::prepare(c);
  experiment::SweepJob job;
  job.splits = prepared.splits;
  job.mlp = c.mlp;
  job.train = c.train;
  job.sinkhorn = c.sinkhorn;
  job.grid = c.grid;
  job.spec = c.sweep;
  job.out_dir = c.out_dir;
  job.resume = o.resume;
  job.jobs = o.jobs;
  spdlog::info("sweep: {} lambdas x {} modes x {} seeds, {} jobs", c.sweep.lambdas.size(), c.sweep.modes.size(),
               c.sweep.seeds.size(), o.jobs);
  const auto outcome = experiment::sweep(job);
  experiment::emit_report(outcome.records, all_fronts(outcome.records), c.out_dir);
  write_failures(c.out_dir, outcome.records);
  std::size_t failed = 0;
  for (const auto& r : outcome.records) failed += r.status == experiment::RunStatus::Failed;
  spdlog::info("{} records ({} reused, {} models trained, {} failed)", outcome.records.size(), outcome.reused,
               outcome.trained, failed);
  return failed == 0 ? 0 : 1;
}

int cmd_evaluate(const Options& o) {
  std::optional<config::ExperimentConfig> c;
  if (!o.config_path.empty()) c = load_config(o);
  const std::string model_path = o.model_path ? *o.model_path
                                 : c          ? (fs::path(c->out_dir) / "model.json").string()
                                              : throw ConfigError("evaluate needs --model or --config");
  const auto ckpt = checkpoint::load(model_path);
  const double tau = o.tau ? *o.tau : c ? c->train.tau : 0.7;
  const metrics::GridSpec grid = c ? c->grid : metrics::GridSpec{};

  data::LabeledDataset ds;
  if (o.data_path) {
    const auto loaded = data::load_csv_with_encoder(*o.data_path, ckpt.encoder);
    if (loaded.report.unseen_levels > 0) spdlog::warn("{} unseen categorical levels encoded as zeros", loaded.report.unseen_levels);
    ds = loaded.dataset;
  } else if (c) {
    ds = config::prepare(*c).splits.test;
  } else {
    throw ConfigError("evaluate needs --data or --config");
  }
  const auto report = metrics::evaluate(training::predict(ckpt.model, ds), tau, grid);
  const fs::path out_dir = o.out ? fs::path(*o.out) : c ? fs::path(c->out_dir) : fs::path(".");
  fs::create_directories(out_dir);
  auto out = open_out(out_dir / "evaluation.txt");
  out << metrics::to_key_value(report);
  spdlog::info("auc_pr_tau={} abpc_tau={} abcc_tau={}", report.auc_pr_tau, report.abpc_tau, report.abcc_tau);
  return 0;
}

int cmd_pareto(const Options& o) {
  std::optional<config::ExperimentConfig> c;
  if (!o.config_path.empty()) c = load_config(o);
  const fs::path out_dir = o.out ? fs::path(*o.out) : c ? fs::path(c->out_dir) : throw ConfigError("pareto needs --out or --config");
  const std::string records_path = o.records_path ? *o.records_path : (out_dir / "records.csv").string();
  const auto records = experiment::read_records_csv(records_path);
  experiment::emit_report(records, all_fronts(records), out_dir.string());
  spdlog::info("fronts written for {} records", records.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("dcfair"));
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");

  CLI::App app{"Decision-centric fairness toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config_path, "Experiment config (JSON)");
  app.add_option("--tau", o.tau, "Decision threshold override")->check(CLI::Range(0.0, 1.0));
  app.add_option("--lambda", o.lambda, "Fairness weight override")->check(CLI::Range(0.0, 1.0));
  app.add_option("--mode", o.mode, "Fairness mode override")
      ->check(CLI::IsMember({"global", "decision-centric", "none"}));
  app.add_option("--seed", o.seed, "Model seed override (init, shuffling, sweep seeds)");
  app.add_option("--jobs", o.jobs, "Parallel jobs")->check(CLI::PositiveNumber);
  app.add_flag("--resume", o.resume, "Reuse finished sweep cells from the journal");
  app.add_option("--out", o.out, "Output directory override");
  app.add_option("--model", o.model_path, "Checkpoint for evaluate");
  app.add_option("--data", o.data_path, "CSV to evaluate instead of the config's test split");
  app.add_option("--records", o.records_path, "records.csv for pareto");

  int code = 0;
  auto bind = [&](const char* name, const char* help, int (*fn)(const Options&)) {
    app.add_subcommand(name, help)->callback([&, fn] { code = fn(o); });
  };
  bind("inject-bias", "Write label-flipped datasets and bias reports", cmd_inject_bias);
  bind("tune", "Grid search the MLP at lambda=0", cmd_tune);
  bind("train", "Train one model and write checkpoint, history and test metrics", cmd_train);
  bind("sweep", "Lambda sweep over fairness modes and seeds", cmd_sweep);
  bind("evaluate", "Evaluate a checkpoint at tau", cmd_evaluate);
  bind("pareto", "Recompute Pareto fronts from records.csv", cmd_pareto);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    spdlog::error("config: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 3;
  }
  return code;
}
