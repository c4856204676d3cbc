#include <benchmark/benchmark.h>

#include "protoflow/config.hpp"
#include "protoflow/trainer.hpp"

using namespace protoflow;

// End-to-end cost of a short incremental run (all steps, losses, eval).
static void BM_ShortRun(benchmark::State& state) {
  RunConfig cfg = standard_benchmark_config();
  cfg.train.iterations_per_step = state.range(0);
  cfg.train.warmup_iterations = state.range(0) / 20;
  cfg.train.eval_per_class = 100;
  cfg.train.log_every = 0;
  const TaskSchedule schedule = build_schedule(cfg.schedule);
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(schedule, cfg.train));
  state.SetItemsProcessed(state.iterations() * state.range(0) * schedule.num_steps());
}
BENCHMARK(BM_ShortRun)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_SampleStep(benchmark::State& state) {
  const RunConfig cfg = standard_benchmark_config();
  const TaskSchedule schedule = build_schedule(cfg.schedule);
  Rng rng(5);
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_step(schedule, 0, state.range(0), rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SampleStep)->Arg(512);
