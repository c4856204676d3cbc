#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "protoflow/stream.hpp"
#include "protoflow/trainer.hpp"

namespace protoflow {

// Declarative schedule description; build_schedule() materializes it with a
// deterministic layout (base means and drift directions from layout_seed).
struct ScheduleConfig {
  int raw_dim = 4;
  std::vector<int> classes_per_step = {3, 1, 1, 1};
  std::vector<double> timestamps;  // empty: unit spacing 0..T
  int samples_per_step = 512;
  double noise_std = 0.6;
  double rho_old = 0.0;
  std::uint64_t layout_seed = 9001;
  double base_radius = 2.5;
  std::vector<std::string> drift_pattern = {"linear", "sinusoidal"};  // cycled over classes
  double drift_magnitude = 0.9;
  double drift_period = 4.0;
  // 0: independent per-class drift directions; 1: a single shared direction
  // (seasonal-style coherent drift). Blended in between.
  double drift_coherence = 0.0;
  std::map<int, DriftSpec> drift_overrides;  // full per-class specs win over the pattern
};

TaskSchedule build_schedule(const ScheduleConfig& cfg);

struct RunConfig {
  std::uint64_t seed = 1;
  Variant variant = Variant::kFull;
  ScheduleConfig schedule;
  TrainConfig train;
  bool write_checkpoints = true;
  bool write_run_log = true;
};

// Strict parse: unknown keys anywhere are rejected with the field path.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

// Complete, re-runnable echo with every default materialized.
std::string echo_run_config(const RunConfig& cfg);

// Stable identity of the protocol, for cross-run comparisons.
std::string schedule_signature(const TaskSchedule& schedule);

// The desk-scale benchmark used throughout the test suites: raw dim 4,
// feature dim 8, six classes over four steps, alternating linear and
// sinusoidal drift.
RunConfig standard_benchmark_config();

// Drift-free variant (for oracle comparisons).
RunConfig stationary_benchmark_config();

}  // namespace protoflow
