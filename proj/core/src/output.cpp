#include "protoflow/output.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "protoflow/errors.hpp"

namespace protoflow {

namespace {

using Json = nlohmann::ordered_json;

std::string reference_text() {
  return R"(# Run bundle reference

One run writes one self-describing directory. All floating-point values use
the shortest exact decimal form (printf %.17g); files are written atomically
(temp file + rename).

## Files

- `config_echo.json` - the complete configuration with every default
  materialized. Re-running this file reproduces the run byte-for-byte.
- `record.json` - machine-readable run record: schedule signature, per-class
  summaries, headline metrics.
- `metrics_summary.csv` - one data row. Columns:
  `variant,seed,miou_all,miou_old,miou_new,oa,mf1,forget,forget_all,min_cos_margin,pearson_curv_forget`
- `metrics_per_class.csv` - one row per class. Columns:
  `class,first_step,final_iou,best_iou,forget,regret,kappa_bar,final_acc`
  (`kappa_bar` empty when the trajectory has fewer than 3 points).
- `iou_history.csv` - one row per (step, class) evaluated. Columns:
  `step,class,iou,acc`
- `angles.csv` - one row per unordered prototype pair at the final step.
  Columns: `class_a,class_b,angle_deg,cos_margin`
- `trajectories.csv` - one row per (class, step) snapshot. Columns:
  `class,step,tau,v_0..v_{d-1}` (raw EMA prototype vector).
- `trajectories.jsonl` - same data, one JSON object per line:
  `{"class":c,"step":t,"tau":x,"mu":[...]}`
- `probe_trajectories.csv` - same columns as `trajectories.csv`, but each
  vector is the current encoder's mean feature over a fixed per-class probe
  set. `kappa_bar` in the metrics tables is computed on these (normalized),
  so representation drift is measured identically for every variant.
- `run_log.jsonl` - one JSON object per logged training iteration:
  `{"step":t,"iter":i,"lr":v,"seg":v,"dist":v,"flow":v,"curve":v,"sep":v,"total":v}`
- `checkpoints/step_<t>.txt` - flat text checkpoints keyed by tensor name:
  `tensor <name> <rows> <cols>` followed by row-major values.
)";
}

void append_tensor(std::string& out, const std::string& name, std::size_t rows,
                   std::size_t cols, const double* data) {
  out += "tensor " + name + " " + std::to_string(rows) + " " + std::to_string(cols) + "\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out += " ";
      out += format_double(data[r * cols + c]);
    }
    out += "\n";
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StateError("atomic_write: cannot open " + tmp.string());
    out << content;
    if (!out) throw StateError("atomic_write: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Wall time is deliberately absent: this file is part of the deterministic
// surface (identical config+seed must reproduce it byte-for-byte).
std::string metrics_summary_csv(const RunRecord& record) {
  const MetricsBundle& m = record.metrics;
  std::string out =
      "variant,seed,miou_all,miou_old,miou_new,oa,mf1,forget,forget_all,"
      "min_cos_margin,pearson_curv_forget\n";
  out += variant_name(record.variant) + "," + std::to_string(record.seed) + "," +
         format_double(m.miou_all) + "," + format_double(m.miou_old) + "," +
         format_double(m.miou_new) + "," + format_double(m.oa) + "," +
         format_double(m.mf1) + ",";
  out += (m.forgetting ? format_double(*m.forgetting) : std::string()) + ",";
  out += (m.forgetting_all ? format_double(*m.forgetting_all) : std::string()) + ",";
  out += format_double(m.min_cos_margin) + ",";
  out += (m.pearson_curv_forget ? format_double(*m.pearson_curv_forget) : std::string());
  out += "\n";
  return out;
}

std::string metrics_per_class_csv(const RunRecord& record) {
  std::string out = "class,first_step,final_iou,best_iou,forget,regret,kappa_bar,final_acc\n";
  for (const ClassSummary& s : record.metrics.per_class) {
    out += std::to_string(s.class_id) + "," + std::to_string(s.first_step) + "," +
           format_double(s.final_iou) + "," + format_double(s.best_iou) + "," +
           format_double(s.forgetting) + "," + format_double(s.regret) + ",";
    out += (s.mean_curvature ? format_double(*s.mean_curvature) : std::string());
    out += "," + format_double(s.final_accuracy) + "\n";
  }
  return out;
}

std::string iou_history_csv(const RunRecord& record) {
  std::string out = "step,class,iou,acc\n";
  for (std::size_t t = 0; t < record.iou_history.size(); ++t)
    for (const auto& [cls, iou] : record.iou_history[t])
      out += std::to_string(t) + "," + std::to_string(cls) + "," + format_double(iou) +
             "," + format_double(record.acc_history[t].at(cls)) + "\n";
  return out;
}

std::string angles_csv(const RunRecord& record) {
  std::string out = "class_a,class_b,angle_deg,cos_margin\n";
  for (const AnglePair& p : record.metrics.angle_pairs)
    out += std::to_string(p.class_a) + "," + std::to_string(p.class_b) + "," +
           format_double(p.angle_deg) + "," + format_double(p.cos_margin) + "\n";
  return out;
}

std::string trajectories_csv(const TrajectoryMap& trajectories) {
  std::size_t dim = 0;
  for (const auto& [cls, traj] : trajectories)
    for (const TrajectoryPoint& p : traj.points) dim = std::max(dim, p.mu.size());
  std::string out = "class,step,tau";
  for (std::size_t d = 0; d < dim; ++d) out += ",v_" + std::to_string(d);
  out += "\n";
  for (const auto& [cls, traj] : trajectories)
    for (const TrajectoryPoint& p : traj.points) {
      out += std::to_string(cls) + "," + std::to_string(p.step) + "," + format_double(p.tau);
      for (std::size_t d = 0; d < dim; ++d)
        out += "," + (d < p.mu.size() ? format_double(p.mu[d]) : std::string("0"));
      out += "\n";
    }
  return out;
}

std::string trajectories_jsonl(const TrajectoryMap& trajectories) {
  std::string out;
  for (const auto& [cls, traj] : trajectories)
    for (const TrajectoryPoint& p : traj.points) {
      Json j;
      j["class"] = cls;
      j["step"] = p.step;
      j["tau"] = p.tau;
      j["mu"] = p.mu;
      out += j.dump() + "\n";
    }
  return out;
}

std::string trajectories_csv(const RunRecord& record) {
  return trajectories_csv(record.trajectories);
}

std::string trajectories_jsonl(const RunRecord& record) {
  return trajectories_jsonl(record.trajectories);
}

std::string run_log_jsonl(const RunRecord& record) {
  std::string out;
  for (const IterationLog& l : record.loss_log) {
    Json j;
    j["step"] = l.step;
    j["iter"] = l.iter;
    j["lr"] = l.lr;
    j["seg"] = l.loss.seg;
    j["dist"] = l.loss.dist;
    j["flow"] = l.loss.flow;
    j["curve"] = l.loss.curve;
    j["sep"] = l.loss.sep;
    j["total"] = l.loss.total;
    out += j.dump() + "\n";
  }
  return out;
}

std::string record_json(const RunRecord& record) {
  Json j;
  j["variant"] = variant_name(record.variant);
  j["seed"] = record.seed;
  j["schedule_signature"] = schedule_signature(record.schedule);
  j["wall_seconds"] = record.wall_seconds;
  j["time_encoding_degenerate"] = record.time_encoding_degenerate;

  Json sw;
  sw["use_flow_field"] = record.switches.use_flow_field;
  sw["use_time"] = record.switches.use_time;
  sw["normalize_prototypes"] = record.switches.normalize_prototypes;
  sw["use_distillation"] = record.switches.use_distillation;
  sw["use_memory"] = record.switches.use_memory;
  sw["cumulative_data"] = record.switches.cumulative_data;
  sw["lambda_dist"] = record.switches.weights.lambda_dist;
  sw["lambda_flow"] = record.switches.weights.lambda_flow;
  sw["lambda_curve"] = record.switches.weights.lambda_curve;
  sw["lambda_sep"] = record.switches.weights.lambda_sep;
  j["switches"] = sw;

  const MetricsBundle& m = record.metrics;
  Json jm;
  jm["miou_all"] = m.miou_all;
  jm["miou_old"] = m.miou_old;
  jm["miou_new"] = m.miou_new;
  jm["oa"] = m.oa;
  jm["mf1"] = m.mf1;
  if (m.forgetting) jm["forget"] = *m.forgetting;
  if (m.forgetting_all) jm["forget_all"] = *m.forgetting_all;
  jm["min_cos_margin"] = m.min_cos_margin;
  if (m.pearson_curv_forget) jm["pearson_curv_forget"] = *m.pearson_curv_forget;
  j["metrics"] = jm;

  Json per_class = Json::array();
  for (const ClassSummary& s : m.per_class) {
    Json c;
    c["class"] = s.class_id;
    c["first_step"] = s.first_step;
    c["final_iou"] = s.final_iou;
    c["best_iou"] = s.best_iou;
    c["forget"] = s.forgetting;
    c["regret"] = s.regret;
    if (s.mean_curvature) c["kappa_bar"] = *s.mean_curvature;
    c["final_acc"] = s.final_accuracy;
    per_class.push_back(c);
  }
  j["per_class"] = per_class;
  return j.dump(2) + "\n";
}

std::string checkpoint_text(const Encoder& enc, const Head& head, const FlowField* flow) {
  std::string out;
  append_tensor(out, "encoder.w1", enc.params.w1.rows, enc.params.w1.cols,
                enc.params.w1.data.data());
  append_tensor(out, "encoder.b1", 1, enc.params.b1.size(), enc.params.b1.data());
  append_tensor(out, "encoder.w2", enc.params.w2.rows, enc.params.w2.cols,
                enc.params.w2.data.data());
  append_tensor(out, "encoder.b2", 1, enc.params.b2.size(), enc.params.b2.data());
  for (const HeadRow& r : head.rows) {
    const std::string base = "head.class" + std::to_string(r.class_id);
    append_tensor(out, base + ".w", 1, r.w.size(), r.w.data());
    append_tensor(out, base + ".b", 1, 1, &r.b);
  }
  if (flow) {
    append_tensor(out, "flow.w1", flow->params.w1.rows, flow->params.w1.cols,
                  flow->params.w1.data.data());
    append_tensor(out, "flow.b1", 1, flow->params.b1.size(), flow->params.b1.data());
    append_tensor(out, "flow.w2", flow->params.w2.rows, flow->params.w2.cols,
                  flow->params.w2.data.data());
    append_tensor(out, "flow.b2", 1, flow->params.b2.size(), flow->params.b2.data());
  }
  return out;
}

void write_run_bundle(const std::filesystem::path& dir, const RunRecord& record,
                      const RunConfig& cfg) {
  std::filesystem::create_directories(dir);
  atomic_write(dir / "config_echo.json", echo_run_config(cfg));
  atomic_write(dir / "REFERENCE.md", reference_text());
  atomic_write(dir / "record.json", record_json(record));
  atomic_write(dir / "metrics_summary.csv", metrics_summary_csv(record));
  atomic_write(dir / "metrics_per_class.csv", metrics_per_class_csv(record));
  atomic_write(dir / "iou_history.csv", iou_history_csv(record));
  atomic_write(dir / "angles.csv", angles_csv(record));
  atomic_write(dir / "trajectories.csv", trajectories_csv(record));
  atomic_write(dir / "trajectories.jsonl", trajectories_jsonl(record));
  atomic_write(dir / "probe_trajectories.csv", trajectories_csv(record.probe_trajectories));
  if (cfg.write_run_log) atomic_write(dir / "run_log.jsonl", run_log_jsonl(record));
  if (cfg.write_checkpoints) {
    for (const ModelSnapshot& ckpt : record.checkpoints) {
      const FlowField* flow = ckpt.flow ? &*ckpt.flow : nullptr;
      atomic_write(dir / "checkpoints" / ("step_" + std::to_string(ckpt.step) + ".txt"),
                   checkpoint_text(ckpt.encoder, ckpt.head, flow));
    }
  }
}

LoadedRecord load_record(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "record.json");
  if (!in) throw ArgumentError("load_record: no record.json in " + run_dir.string());
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError("load_record: bad record.json: " + std::string(e.what()));
  }
  LoadedRecord rec;
  rec.schedule_signature = j.at("schedule_signature").get<std::string>();
  rec.variant = j.at("variant").get<std::string>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  rec.miou_all = j.at("metrics").at("miou_all").get<double>();
  if (j.at("metrics").contains("forget"))
    rec.forgetting = j.at("metrics").at("forget").get<double>();
  rec.min_cos_margin = j.at("metrics").at("min_cos_margin").get<double>();
  for (const Json& c : j.at("per_class")) {
    ClassSummary s;
    s.class_id = c.at("class").get<int>();
    s.first_step = c.at("first_step").get<int>();
    s.final_iou = c.at("final_iou").get<double>();
    s.best_iou = c.at("best_iou").get<double>();
    s.forgetting = c.at("forget").get<double>();
    s.regret = c.at("regret").get<double>();
    if (c.contains("kappa_bar")) s.mean_curvature = c.at("kappa_bar").get<double>();
    s.final_accuracy = c.at("final_acc").get<double>();
    rec.per_class.push_back(s);
  }
  return rec;
}

std::string delta_csv(const DeltaReport& report) {
  std::string out = "class,delta_kappa_bar,delta_forget,delta_final_iou,favorable\n";
  for (const DeltaEntry& e : report.entries) {
    out += std::to_string(e.class_id) + ",";
    out += (e.d_curvature ? format_double(*e.d_curvature) : std::string()) + ",";
    out += format_double(e.d_forgetting) + "," + format_double(e.d_final_iou) + ",";
    out += (e.favorable ? "1" : "0");
    out += "\n";
  }
  return out;
}

std::string theory_report_jsonl(const TheorySuiteReport& report) {
  std::string out;
  {
    Json j;
    j["kind"] = "summary";
    j["margin_path_violations"] = report.margin_path_violations;
    j["path_curvature_violations"] = report.path_curvature_violations;
    j["lipschitz_violations"] = report.lipschitz_violations;
    j["margin_bound_violations"] = report.margin_bound_violations;
    j["forgetting_bound_violations"] = report.forgetting_bound_violations;
    j["regret_bound_violations"] = report.regret_bound_violations;
    j["exactness_violations"] = report.exactness_violations;
    j["two_class_worlds"] = report.two_class_worlds;
    j["escalations"] = report.escalations;
    j["worst_trajectory_slack"] = report.worst_trajectory_slack;
    j["max_exactness_z"] = report.max_exactness_z;
    j["pass"] = report.pass();
    out += j.dump() + "\n";
  }
  for (std::size_t i = 0; i < report.world_reports.size(); ++i) {
    const BoundReport& r = report.world_reports[i];
    Json j;
    j["kind"] = "world";
    j["index"] = i;
    j["gamma_min"] = r.gamma_min;
    j["lipschitz"] = r.lipschitz;
    j["path_length"] = r.path_length;
    j["curvature_energy"] = r.curvature_energy;
    j["forgetting_hat"] = r.forgetting_hat;
    j["forgetting_bound"] = r.forgetting_bound;
    j["regret_hat"] = r.regret_hat;
    j["regret_bound"] = r.regret_bound;
    j["margin_bound_violations"] = r.margin_bound_violations;
    j["forgetting_bound_pass"] = r.forgetting_bound_pass;
    j["regret_bound_pass"] = r.regret_bound_pass;
    j["two_class_exact_pass"] = r.two_class_exact_pass;
    j["escalations"] = r.escalations;
    Json risks = Json::array();
    for (const McEstimate& e : r.risks) {
      Json re;
      re["p_hat"] = e.p_hat;
      re["std_error"] = e.std_error;
      re["samples"] = e.samples;
      risks.push_back(re);
    }
    j["risks"] = risks;
    j["margins"] = r.margins;
    j["bound_g"] = r.bound_g;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace protoflow
