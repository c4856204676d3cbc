#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/vec.hpp"

namespace protoflow {

// K x K counts, rows = ground truth, cols = prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> counts;

  explicit ConfusionMatrix(int k = 0) : num_classes(k), counts(static_cast<std::size_t>(k) * k, 0) {}
  std::int64_t& at(int gt, int pred) { return counts[static_cast<std::size_t>(gt) * num_classes + pred]; }
  std::int64_t at(int gt, int pred) const { return counts[static_cast<std::size_t>(gt) * num_classes + pred]; }
  std::int64_t total() const;
};

// IoU_c = tp / (row + col - tp). Classes with an empty denominator are
// undefined (excluded from means).
std::vector<std::optional<double>> iou_from_confusion(const ConfusionMatrix& cm);

double mean_defined(const std::vector<std::optional<double>>& values);

struct OaF1 {
  double oa = 0.0;
  std::vector<double> f1;  // 0/0 -> 0 by convention
  double mf1 = 0.0;
};

OaF1 oa_f1(const ConfusionMatrix& cm);

// Per-class measurements indexed [step][class]; a class appears from its
// introduction step onward.
using PerStepClassValues = std::vector<std::map<int, double>>;

// Average forgetting score over the intermediate step groups t = 1..T-1:
// F = 1/(T-1) sum_t (best mIoU of step-t classes - final mIoU of them).
// `include_final_group` extends the sum to t = T (the diagnostic F_all).
std::optional<double> forgetting_score(const PerStepClassValues& iou_history,
                                       const std::map<int, int>& first_step,
                                       bool include_final_group = false);

// max over steps minus final value.
double per_class_forgetting(const std::vector<double>& history);

// Reg = sum_t (risk_t - min_s risk_s); risks in [0, 1].
double dynamic_regret(const std::vector<double>& risks);

// Sample Pearson correlation; nullopt when a variance is zero.
std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys);

struct AnglePair {
  int class_a = -1;
  int class_b = -1;
  double angle_deg = 0.0;
  double cos_margin = 0.0;  // 1 - cos(theta), in [0, 2]
};

struct AngleReport {
  std::vector<AnglePair> pairs;
  double min_margin = 0.0;
  double mean_angle_deg = 0.0;
};

// All unordered pairs of final-step prototypes; inputs must be unit-norm.
AngleReport prototype_angles(const std::map<int, Vec>& normalized_prototypes);

// Per-class material for cross-run comparisons.
struct ClassSummary {
  int class_id = -1;
  int first_step = -1;
  double final_iou = 0.0;
  double best_iou = 0.0;
  double forgetting = 0.0;
  double regret = 0.0;
  std::optional<double> mean_curvature;
  double final_accuracy = 0.0;
};

struct DeltaEntry {
  int class_id = -1;
  std::optional<double> d_curvature;
  double d_forgetting = 0.0;
  double d_final_iou = 0.0;
  bool favorable = false;  // both curvature and forgetting strictly lower
};

struct DeltaReport {
  std::vector<DeltaEntry> entries;
  int favorable_count = 0;
  int defined_count = 0;  // entries with a defined curvature delta
};

// Record A minus record B, per class. Requires identical class sets.
DeltaReport delta_analysis(const std::vector<ClassSummary>& a,
                           const std::vector<ClassSummary>& b);

// Everything reported for one finished run.
struct MetricsBundle {
  std::vector<ClassSummary> per_class;
  double miou_all = 0.0;
  double miou_old = 0.0;  // base-step classes
  double miou_new = 0.0;  // classes added at t >= 1
  double oa = 0.0;
  double mf1 = 0.0;
  std::optional<double> forgetting = 0.0;      // F over t = 1..T-1
  std::optional<double> forgetting_all = 0.0;  // F over t = 1..T
  std::optional<double> pearson_curv_forget;
  double min_cos_margin = 0.0;
  std::vector<AnglePair> angle_pairs;
};

}  // namespace protoflow
