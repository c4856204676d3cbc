#pragma once

#include <filesystem>
#include <string>

#include "protoflow/config.hpp"
#include "protoflow/theory.hpp"
#include "protoflow/trainer.hpp"

namespace protoflow {

// All file writes go through a temp-file + rename so readers never observe a
// partial file.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string format_double(double v);  // shortest exact form (%.17g)

// One run = one self-describing directory:
//   config_echo.json, REFERENCE.md, record.json, metrics_summary.csv,
//   metrics_per_class.csv, iou_history.csv, angles.csv, trajectories.csv,
//   trajectories.jsonl, run_log.jsonl, checkpoints/step_<t>.txt
void write_run_bundle(const std::filesystem::path& dir, const RunRecord& record,
                      const RunConfig& cfg);

std::string metrics_summary_csv(const RunRecord& record);
std::string metrics_per_class_csv(const RunRecord& record);
std::string iou_history_csv(const RunRecord& record);
std::string angles_csv(const RunRecord& record);
std::string trajectories_csv(const TrajectoryMap& trajectories);
std::string trajectories_jsonl(const TrajectoryMap& trajectories);
std::string trajectories_csv(const RunRecord& record);  // EMA-bank trajectories
std::string trajectories_jsonl(const RunRecord& record);
std::string run_log_jsonl(const RunRecord& record);
std::string record_json(const RunRecord& record);

// Minimal view of a saved run, enough for cross-run analysis.
struct LoadedRecord {
  std::string schedule_signature;
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<ClassSummary> per_class;
  double miou_all = 0.0;
  std::optional<double> forgetting;
  double min_cos_margin = 0.0;
};

LoadedRecord load_record(const std::filesystem::path& run_dir);

// Delta-analysis export (record A minus record B).
std::string delta_csv(const DeltaReport& report);

std::string theory_report_jsonl(const TheorySuiteReport& report);

// Flat text checkpoint: one "tensor <name> <rows> <cols>" header line per
// tensor followed by its row-major values.
std::string checkpoint_text(const Encoder& enc, const Head& head,
                            const FlowField* flow);

}  // namespace protoflow
