#include "dcfair/errors.hpp"
#include "dcfair/experiment.hpp"
#include "dcfair/rng.hpp"

#include "oracles.hpp"
#include "temp_dir.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace dcfair;
using namespace dcfair::experiment;
using dcfair::testing::slurp;
using dcfair::testing::TempDir;
namespace fs = std::filesystem;

namespace {

data::Splits synthetic_splits(std::size_t rows, std::uint64_t seed) {
  oracle::SyntheticSpec spec;
  spec.rows = rows;
  spec.seed = seed;
  const auto all = oracle::synthetic_dataset(spec);
  return data::split(all, data::SplitSpec{});
}

training::TrainConfig quick_train() {
  training::TrainConfig t;
  t.batch_size = 64;
  t.warmup_epochs = 1;
  t.patience = 3;
  t.max_epochs = 4;
  return t;
}

model::MlpConfig small_mlp() {
  model::MlpConfig m;
  m.hidden_layers = 2;
  m.hidden_size = 16;
  m.learning_rate = 0.01;
  return m;
}

SweepJob small_job(const data::Splits& splits) {
  SweepJob job;
  job.splits = splits;
  job.mlp = small_mlp();
  job.train = quick_train();
  job.spec.lambdas = {0.0, 0.3};
  job.spec.seeds = {0, 1};
  job.spec.tau = 0.5;
  job.spec.dataset = "synthetic";
  return job;
}

RunRecord record(double perf, double fair, std::uint64_t seed,
                 losses::FairnessVariant mode = losses::FairnessVariant::Global) {
  RunRecord r;
  r.auc_pr_tau = perf;
  r.abcc_tau = fair;
  r.abpc_tau = 2 * fair;
  r.seed = seed;
  r.mode = mode;
  r.lambda = 0.1;
  return r;
}

std::vector<std::string> sorted_keys(const std::vector<RunRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.key());
  std::sort(out.begin(), out.end());
  return out;
}

void expect_same_metrics(const std::vector<RunRecord>& a, const std::vector<RunRecord>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].key(), b[i].key());
    EXPECT_EQ(a[i].auc_pr_tau, b[i].auc_pr_tau);
    EXPECT_EQ(a[i].abpc_tau, b[i].abpc_tau);
    EXPECT_EQ(a[i].abcc_tau, b[i].abcc_tau);
    EXPECT_EQ(a[i].k_pct, b[i].k_pct);
    EXPECT_EQ(a[i].epochs, b[i].epochs);
  }
}

}  // namespace

TEST(ParallelFor, RunsEveryIndexAndRethrows) {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) { if (i == 7) throw ExperimentError("boom"); }),
               ExperimentError);
}

TEST(GridSearch, DefaultSpaceHas108Points) {
  const SearchSpace space;
  const auto configs = space.enumerate(small_mlp());
  ASSERT_EQ(configs.size(), 108u);
  EXPECT_EQ(configs.front().hidden_layers, 2);
  EXPECT_EQ(configs[1].l2_weight, 0.01);
  EXPECT_EQ(configs.back().hidden_size, 128);
  for (const auto& c : configs) EXPECT_TRUE(c.off_grid_fields().empty());
}

TEST(GridSearch, SinglePointEchoesIt) {
  const auto splits = synthetic_splits(300, 1);
  SearchSpace space{{3}, {32}, {0.01}, {0.05}};
  const auto r = grid_search(splits.train, splits.validation, space, small_mlp(), quick_train());
  EXPECT_EQ(r.best.hidden_layers, 3);
  EXPECT_EQ(r.best.hidden_size, 32);
  EXPECT_EQ(r.best.dropout_prob, 0.01);
  EXPECT_EQ(r.best.l2_weight, 0.05);
  ASSERT_EQ(r.leaderboard.size(), 1u);
}

TEST(GridSearch, PicksLowestLossAndIsReproducible) {
  const auto splits = synthetic_splits(300, 2);
  SearchSpace space{{2}, {16, 32}, {0.0}, {0.0, 0.05}};
  const auto a = grid_search(splits.train, splits.validation, space, small_mlp(), quick_train(), {}, 2);
  const auto b = grid_search(splits.train, splits.validation, space, small_mlp(), quick_train(), {}, 1);
  ASSERT_EQ(a.leaderboard.size(), 4u);
  const auto best = std::min_element(a.leaderboard.begin(), a.leaderboard.end(),
                                     [](const auto& x, const auto& y) { return x.val_loss < y.val_loss; });
  EXPECT_EQ(a.best.hidden_size, best->config.hidden_size);
  EXPECT_EQ(a.best.l2_weight, best->config.l2_weight);
  std::ostringstream sa, sb;
  write_leaderboard_csv(sa, a);
  write_leaderboard_csv(sb, b);
  const std::string board = sa.str();
  EXPECT_EQ(board, sb.str());
  EXPECT_EQ(std::count(board.begin(), board.end(), '\n'), 5);
}

TEST(SweepSpec, Validation) {
  EXPECT_EQ(SweepSpec::default_lambdas().size(), 20u);
  EXPECT_NEAR(SweepSpec::default_lambdas().back(), 0.95, 1e-12);
  SweepSpec s;
  s.lambdas = {0.0, 0.5, 0.3};
  EXPECT_THROW(s.validate(), SpecError);
  s.lambdas = {0.2, 0.5};
  EXPECT_THROW(s.validate(), SpecError);
  s.lambdas = {0.0, 1.0};
  EXPECT_THROW(s.validate(), SpecError);
}

TEST(Sweep, SingleCell) {
  auto job = small_job(synthetic_splits(300, 3));
  job.spec.modes = {losses::FairnessVariant::Global};
  job.spec.lambdas = {0.0};
  job.spec.seeds = {0};
  const auto out = sweep(job);
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.trained, 1u);
}

TEST(Sweep, CardinalityAndSharedBaseline) {
  const auto out = sweep(small_job(synthetic_splits(400, 4)));
  ASSERT_EQ(out.records.size(), 8u);  // 2 modes x 2 lambdas x 2 seeds
  EXPECT_EQ(out.trained, 6u);         // one baseline per seed plus 4 penalized cells
  std::set<std::string> keys;
  for (const auto& r : out.records) {
    keys.insert(r.key());
    EXPECT_EQ(r.status, RunStatus::Ok);
    EXPECT_TRUE(std::isfinite(r.abcc_tau));
    EXPECT_EQ(r.k_pct.has_value(), r.mode == losses::FairnessVariant::DecisionCentric);
  }
  EXPECT_EQ(keys.size(), 8u);
  for (std::uint64_t seed : {0, 1}) {
    const RunRecord* g = nullptr;
    const RunRecord* d = nullptr;
    for (const auto& r : out.records) {
      if (r.seed != seed || r.lambda != 0.0) continue;
      (r.mode == losses::FairnessVariant::Global ? g : d) = &r;
    }
    ASSERT_TRUE(g && d);
    EXPECT_EQ(g->auc_pr_tau, d->auc_pr_tau);
    EXPECT_EQ(g->abcc_tau, d->abcc_tau);
  }
}

TEST(Sweep, ResumeReproducesUninterruptedRun) {
  const auto splits = synthetic_splits(400, 5);
  TempDir full_dir, partial_dir;
  auto job = small_job(splits);
  job.out_dir = full_dir.path().string();
  const auto full = sweep(job);

  // Interrupt: keep the header and the first three journal lines.
  job.out_dir = partial_dir.path().string();
  sweep(job);
  const auto journal = partial_dir.file("records.journal.csv");
  std::istringstream lines(slurp(journal));
  std::string kept, line;
  for (int i = 0; i < 4 && std::getline(lines, line); ++i) kept += line + "\n";
  std::ofstream(journal, std::ios::trunc) << kept;

  job.resume = true;
  const auto resumed = sweep(job);
  EXPECT_EQ(resumed.reused, 3u);
  EXPECT_LT(resumed.trained, full.trained);
  expect_same_metrics(full.records, resumed.records);
  EXPECT_EQ(slurp(full_dir.file("curves/global_lambda0.3_seed1__pr.csv")),
            slurp(partial_dir.file("curves/global_lambda0.3_seed1__pr.csv")));
}

TEST(Records, CsvRoundTrip) {
  TempDir dir;
  std::vector<RunRecord> rs{record(0.7, 0.1, 0), record(0.6, 0.05, 1, losses::FairnessVariant::DecisionCentric)};
  rs[1].k_pct = 0.31;
  rs[1].bias_rate = 0.5;
  rs.push_back(record(0.0, 0.0, 2));
  rs[2].status = RunStatus::Failed;
  rs[2].auc_pr_tau = rs[2].abcc_tau = rs[2].abpc_tau = std::nan("");
  std::ofstream(dir.file("r.csv")) << [&] {
    std::ostringstream os;
    write_records_csv(os, rs);
    return os.str();
  }();
  const auto back = read_records_csv(dir.file("r.csv"));
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].k_pct, 0.31);
  EXPECT_EQ(back[1].bias_rate, 0.5);
  EXPECT_EQ(back[0].auc_pr_tau, 0.7);
  EXPECT_EQ(back[2].status, RunStatus::Failed);
  EXPECT_TRUE(std::isnan(back[2].abcc_tau));
}

TEST(Pareto, HandExample) {
  const std::vector<RunRecord> rs{record(0.8, 0.1, 0), record(0.7, 0.05, 1), record(0.6, 0.2, 2),
                                  record(0.8, 0.1, 3), record(0.75, 0.1, 4)};
  const auto front = pareto_front(rs, FairnessMetric::AbccTau);
  std::vector<std::uint64_t> seeds;
  for (const auto& r : front.members) seeds.push_back(r.seed);
  EXPECT_EQ(seeds, (std::vector<std::uint64_t>{1, 0, 3}));  // ascending fairness, ties both kept
}

TEST(Pareto, SingleRecordAndFailures) {
  auto failed = record(0.99, 0.0, 1);
  failed.status = RunStatus::Failed;
  const auto front = pareto_front({record(0.5, 0.5, 0), failed}, FairnessMetric::AbccTau);
  ASSERT_EQ(front.members.size(), 1u);
  EXPECT_EQ(front.members[0].seed, 0u);
}

TEST(Pareto, MatchesBruteForce) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    std::vector<RunRecord> rs;
    const std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse values force ties on both axes.
      rs.push_back(record(std::round(rng.uniform() * 10) / 10, std::round(rng.uniform() * 10) / 10, i));
      if (rng.uniform() < 0.1) rs.back().status = RunStatus::Failed;
    }
    for (auto metric : {FairnessMetric::AbccTau, FairnessMetric::AbpcTau}) {
      std::vector<RunRecord> expected;
      for (auto i : oracle::brute_pareto(rs, metric)) expected.push_back(rs[i]);
      EXPECT_EQ(sorted_keys(pareto_front(rs, metric).members), sorted_keys(expected));
    }
  }
}

TEST(Report, HeadersOnlyWhenEmpty) {
  TempDir dir;
  emit_report({}, pareto_fronts_by_mode({}, FairnessMetric::AbccTau), dir.path().string());
  const auto text = slurp(dir.file("records.csv"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1);
}

TEST(Report, ByteIdenticalOnRerun) {
  TempDir a, b;
  std::vector<RunRecord> rs{record(0.8, 0.1, 0), record(0.7, 0.05, 1, losses::FairnessVariant::DecisionCentric),
                            record(0.6, 0.02, 2)};
  auto fronts = pareto_fronts_by_mode(rs, FairnessMetric::AbccTau);
  const auto more = pareto_fronts_by_mode(rs, FairnessMetric::AbpcTau);
  fronts.insert(fronts.end(), more.begin(), more.end());
  emit_report(rs, fronts, a.path().string());
  emit_report(rs, fronts, b.path().string());
  for (const char* f : {"records.csv", "pareto_abcc_tau.csv", "pareto_abpc_tau.csv"}) {
    EXPECT_EQ(slurp(a.file(f)), slurp(b.file(f))) << f;
  }
  const auto front = slurp(a.file("pareto_abcc_tau.csv"));
  EXPECT_EQ(std::count(front.begin(), front.end(), '\n'), 4);  // header + 2 global + 1 decision-centric
}

TEST(Curves, FilesAndShapes) {
  TempDir dir;
  metrics::ScoreSet set{{0.9, 0.8, 0.6, 0.4, 0.2, 0.75}, {1, 0, 1, 1, 0, 1}, {0, 1, 0, 1, 0, 1}};
  metrics::GridSpec grid;
  grid.points = 101;
  write_curves(dir.path().string(), "k", set, 0.5, grid);
  for (const char* suffix : {"__pdf_s0.csv", "__pdf_s1.csv", "__cdf_s0.csv", "__cdf_s1.csv"}) {
    const auto text = slurp(dir.file(std::string("k") + suffix));
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 102) << suffix;
  }
  const auto pr = slurp(dir.file("k__pr.csv"));
  EXPECT_EQ(pr.substr(0, pr.find('\n')), "threshold,precision,recall");
  EXPECT_EQ(std::count(pr.begin(), pr.end(), '\n'), 6);  // 4 thresholds >= 0.5 plus the anchor
}
