#include <benchmark/benchmark.h>

#include "protoflow/flowfield.hpp"
#include "protoflow/mlp.hpp"
#include "protoflow/protobank.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/theory.hpp"

using namespace protoflow;

static void BM_Mlp2Forward(benchmark::State& state) {
  Rng rng(1);
  const int in = state.range(0), hidden = state.range(1), out = state.range(2);
  const Mlp2Params p = make_mlp2_kaiming(in, hidden, out, rng);
  Vec x(in);
  for (double& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(mlp2_forward(p, x));
}
BENCHMARK(BM_Mlp2Forward)->Args({4, 32, 8})->Args({24, 256, 8});

static void BM_Mlp2Backward(benchmark::State& state) {
  Rng rng(2);
  const int in = state.range(0), hidden = state.range(1), out = state.range(2);
  const Mlp2Params p = make_mlp2_kaiming(in, hidden, out, rng);
  Vec x(in), gout(out);
  for (double& v : x) v = rng.normal();
  for (double& v : gout) v = rng.normal();
  Mlp2Cache cache;
  mlp2_forward(p, x, &cache);
  Mlp2Params grad = make_mlp2(in, hidden, out);
  for (auto _ : state) benchmark::DoNotOptimize(mlp2_backward(p, cache, gout, grad));
}
BENCHMARK(BM_Mlp2Backward)->Args({4, 32, 8})->Args({24, 256, 8});

static void BM_McRisk(benchmark::State& state) {
  Rng rng(3);
  const GaussianWorld world = random_world(rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(mc_risk(world, 0, state.range(0), rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McRisk)->Arg(10000)->Arg(100000);

static void BM_TrajectoryGeometry(benchmark::State& state) {
  Rng rng(4);
  std::vector<Vec> pts;
  for (int t = 0; t < state.range(0); ++t) {
    Vec p(8);
    for (double& v : p) v = rng.normal();
    pts.push_back(p);
  }
  for (auto _ : state) benchmark::DoNotOptimize(geometry(pts));
}
BENCHMARK(BM_TrajectoryGeometry)->Arg(4)->Arg(16)->Arg(64);

static void BM_EncodeTime(benchmark::State& state) {
  TimeEncodingConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(encode_time(cfg, 0.37, 0.0, 1.0));
}
BENCHMARK(BM_EncodeTime);
