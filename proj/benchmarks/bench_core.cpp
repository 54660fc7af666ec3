#include "dcfair/losses.hpp"
#include "dcfair/metrics.hpp"
#include "dcfair/model.hpp"
#include "dcfair/rng.hpp"

#include <benchmark/benchmark.h>

using namespace dcfair;

namespace {

std::vector<double> sample(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

void BM_SinkhornW1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = sample(n, 1), b = sample(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(losses::sinkhorn_w1(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SinkhornW1)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_ExactW1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = sample(n, 3), b = sample(n + 7, 4);
  for (auto _ : state) benchmark::DoNotOptimize(losses::exact_w1(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ExactW1)->RangeMultiplier(8)->Range(64, 32768)->Complexity();

void BM_AbccTau(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  metrics::ScoreSet set;
  set.scores = sample(n, 5);
  Rng rng(6);
  for (std::size_t i = 0; i < n; ++i) {
    set.labels.push_back(rng.uniform() < set.scores[i]);
    set.protected_attr.push_back(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(metrics::abcc_tau(set, 0.7));
}
BENCHMARK(BM_AbccTau)->Arg(1000)->Arg(20000);

void BM_ForwardBackward(benchmark::State& state) {
  const auto batch = state.range(0);
  model::MlpConfig cfg;
  cfg.hidden_layers = 3;
  cfg.hidden_size = 64;
  cfg.dropout_prob = 0.1;
  const auto params = model::init_model(40, cfg);
  Rng rng(7);
  Matrix x(batch, 40);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const Vector upstream = Vector::Constant(batch, 1.0 / static_cast<double>(batch));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const auto fwd = model::forward(params, cfg, x, true, seed++);
    benchmark::DoNotOptimize(model::backward(params, fwd.cache, upstream));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(256)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
