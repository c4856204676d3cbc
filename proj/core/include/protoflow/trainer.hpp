#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/flowfield.hpp"
#include "protoflow/losses.hpp"
#include "protoflow/metrics.hpp"
#include "protoflow/model.hpp"
#include "protoflow/protobank.hpp"
#include "protoflow/stream.hpp"

namespace protoflow {

enum class Variant {
  kFull,
  kNoField,     // drop F_phi and the flow loss
  kNoCurve,     // lambda_curve = 0
  kNoSep,       // lambda_sep = 0
  kNoTime,      // field sees mu only
  kNoNorm,      // raw prototypes in all prototype losses
  kFineTune,    // cross-entropy only, no memory, no teacher
  kJointOracle  // cumulative data, cross-entropy only
};

std::string variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);
std::vector<Variant> ablation_variants();  // Full plus the five single-factor switches

// Distribution old classes are scored against at step t:
//   kCurrent: the drifted distribution at tau_t (deployment framing),
//   kIntroduction: each class's acquisition-time distribution,
//   kSpan: a fixed mixture over the full time span (domain-incremental
//          framing: the validation set covers every acquisition period).
enum class EvalTimeMode { kCurrent, kIntroduction, kSpan };

struct TrainConfig {
  LossWeights weights;
  int iterations_per_step = 2000;
  int batch_size = 64;
  double base_lr = 0.05;
  double warmup_start_lr = 1e-4;
  int warmup_iterations = 100;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double poly_power = 0.9;
  double clip_norm = 1.0;
  double ema_alpha = 0.1;
  int encoder_hidden = 32;
  int feat_dim = 8;
  int flow_hidden = 256;
  TimeEncodingConfig time_encoding;
  double head_init_std = 0.0;  // zero-init head rows: new classes start neutral
  int memory_budget = 20;
  MemoryStrategy memory_strategy = MemoryStrategy::kHerding;
  int eval_per_class = 500;
  EvalTimeMode eval_time_mode = EvalTimeMode::kCurrent;
  double time_shuffle_alpha = 0.0;
  int log_every = 1;
  std::uint64_t seed = 1;
  Variant variant = Variant::kFull;
};

// Effective switches after resolving the variant against the base weights.
struct VariantSwitches {
  bool use_flow_field = true;
  bool use_time = true;
  bool normalize_prototypes = true;
  bool use_distillation = true;
  bool use_memory = true;
  bool cumulative_data = false;
  LossWeights weights;
};

VariantSwitches resolve_variant(Variant v, const LossWeights& base);

struct IterationLog {
  int step = 0;
  int iter = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

// Model state captured at a step boundary, for checkpoint export.
struct ModelSnapshot {
  int step = 0;
  Encoder encoder;
  Head head;
  std::optional<FlowField> flow;
};

// Full experiment trace.
struct RunRecord {
  std::uint64_t seed = 0;
  Variant variant = Variant::kFull;
  VariantSwitches switches;
  TaskSchedule schedule;
  TrainConfig config;
  std::map<int, int> first_step;
  PerStepClassValues iou_history;  // [step][class]
  PerStepClassValues acc_history;  // per-class recall on held-out data
  std::vector<IterationLog> loss_log;
  TrajectoryMap trajectories;  // raw end-of-step EMA prototypes (drive the losses)
  // Re-encoded prototypes of a fixed per-class probe set, one per step; the
  // geometry metrics (kappa_bar) are computed on these so that representation
  // drift is measured the same way for every variant, including memoryless
  // ones whose EMA bank would otherwise freeze.
  TrajectoryMap probe_trajectories;
  std::map<int, Vec> final_prototypes;  // normalized final-step bank
  std::vector<ModelSnapshot> checkpoints;  // one per step boundary
  ConfusionMatrix final_confusion;
  MetricsBundle metrics;
  double wall_seconds = 0.0;
  bool time_encoding_degenerate = false;
};

double poly_lr_from_config(const TrainConfig& cfg, int iter);

RunRecord run_experiment(const TaskSchedule& schedule, const TrainConfig& cfg);

// Full plus the five ablations, identical seeds and schedules.
std::map<Variant, RunRecord> run_ablation_suite(const TaskSchedule& schedule,
                                                const TrainConfig& base,
                                                int threads = 0);

struct SweepCell {
  double lambda_curve = 0.0;
  double lambda_sep = 0.0;
  std::vector<double> miou_all;   // per seed
  std::vector<double> forgetting; // per seed
  double miou_mean = 0.0;
  double forget_mean = 0.0;
};

std::vector<SweepCell> run_sweep(const TaskSchedule& schedule, const TrainConfig& base,
                                 const std::vector<double>& curve_grid,
                                 const std::vector<double>& sep_grid,
                                 const std::vector<std::uint64_t>& seeds,
                                 int threads = 0);

// Recomputes the metrics bundle from the record's histories and trajectories.
MetricsBundle compute_metrics(const RunRecord& record);

}  // namespace protoflow
