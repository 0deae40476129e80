#include <benchmark/benchmark.h>

#include "stethofed/augment.hpp"
#include "stethofed/fed_sim.hpp"
#include "stethofed/model.hpp"
#include "stethofed/probe.hpp"

namespace {

using namespace stethofed;

SpecGrid noise_grid(RngStream& s, std::size_t f, std::size_t t) {
  std::vector<double> v(f * t);
  for (auto& x : v) x = -80.0 + 5.0 * s.normal();
  return SpecGrid(f, t, std::move(v));
}

ModelSpec bench_spec() {
  ModelSpec spec;
  spec.vocab = 13;
  spec.center_input = true;
  return spec;
}

void BM_LossAndGrad(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  RngStream s(1);
  auto init = s.child("init");
  const auto model = init_model(bench_spec(), init);
  std::vector<SpecGrid> grids;
  for (std::size_t i = 0; i < batch; ++i) grids.push_back(noise_grid(s, 64, 128));
  std::vector<SampleView> views;
  for (std::size_t i = 0; i < batch; ++i) {
    LabelDist y{};
    y[i % kNumClasses] = 1.0;
    views.push_back({&grids[i], MetaPrompt{}, y});
  }
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_grad(model, views));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_LossAndGrad)->Arg(1)->Arg(16);

void BM_Hvp(benchmark::State& state) {
  RngStream s(2);
  auto init = s.child("init");
  const auto model = init_model(bench_spec(), init);
  const auto grid = noise_grid(s, 64, 128);
  LabelDist y{};
  y[1] = 1.0;
  const SampleView sample{&grid, MetaPrompt{}, y};
  ParamVector v = model.params;
  for (auto& x : v.values()) x = s.normal();
  for (auto _ : state) benchmark::DoNotOptimize(hvp(model, sample, v, 1e-4));
}
BENCHMARK(BM_Hvp);

void BM_GinAugment(benchmark::State& state) {
  RngStream s(3);
  const GinConfig cfg;
  auto ks = s.child("kernels");
  const auto kernels = sample_kernels(ks, cfg);
  const auto grid = noise_grid(s, 64, 128);
  auto draw = s.child("draw");
  for (auto _ : state) benchmark::DoNotOptimize(gin_augment(grid, draw, kernels, cfg));
}
BENCHMARK(BM_GinAugment);

void BM_FedAvg(benchmark::State& state) {
  RngStream s(4);
  auto init = s.child("init");
  const auto model = init_model(bench_spec(), init);
  std::vector<ClientUpdate> updates;
  for (int k = 0; k < 4; ++k) {
    ParamVector p = model.params;
    for (auto& x : p.values()) x += s.normal();
    updates.push_back({std::move(p), 1600u + static_cast<std::size_t>(k)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(fedavg_aggregate(updates));
}
BENCHMARK(BM_FedAvg);

void BM_Knn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  RngStream s(5);
  EmbeddingSet e;
  e.dim = 32;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < e.dim; ++d) e.data.push_back(s.normal());
    e.device.emplace_back("dev");
    e.disease.push_back(RespClass::Normal);
    labels.push_back(static_cast<int>(s.below(4)));
  }
  for (auto _ : state) benchmark::DoNotOptimize(knn_accuracy(e, labels, 50));
}
BENCHMARK(BM_Knn)->Arg(500)->Arg(2000);

void BM_LowRankWhiten(benchmark::State& state) {
  RngStream s(6);
  EmbeddingSet e;
  e.dim = 32;
  for (std::size_t i = 0; i < 2000; ++i) {
    for (std::size_t d = 0; d < e.dim; ++d) e.data.push_back(s.normal() * (1.0 + d));
    e.device.emplace_back("dev");
    e.disease.push_back(RespClass::Normal);
  }
  for (auto _ : state) benchmark::DoNotOptimize(lowrank_whiten(e, 2));
}
BENCHMARK(BM_LowRankWhiten);

}  // namespace

BENCHMARK_MAIN();
