#include "protoflow/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "protoflow/errors.hpp"
#include "protoflow/rng.hpp"

namespace protoflow {

namespace {

using Json = nlohmann::ordered_json;

DriftKind drift_kind_from_name(const std::string& name, const std::string& where) {
  if (name == "static") return DriftKind::kStatic;
  if (name == "linear") return DriftKind::kLinear;
  if (name == "sinusoidal") return DriftKind::kSinusoidal;
  if (name == "piecewise") return DriftKind::kPiecewise;
  throw ConfigError("unknown drift kind '" + name + "'", where);
}

std::string drift_kind_name(DriftKind k) {
  switch (k) {
    case DriftKind::kStatic: return "static";
    case DriftKind::kLinear: return "linear";
    case DriftKind::kSinusoidal: return "sinusoidal";
    case DriftKind::kPiecewise: return "piecewise";
  }
  return "static";
}

void reject_unknown(const Json& obj, const std::vector<std::string>& known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const std::string& k : known)
      if (k == key) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where, where + "." + key);
  }
}

template <typename T>
void read_field(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad value for '" + std::string(key) + "': " + e.what(),
                      where + "." + key);
  }
}

Vec read_vec(const Json& arr, const std::string& where) {
  try {
    return arr.get<Vec>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad vector: ") + e.what(), where);
  }
}

}  // namespace

TaskSchedule build_schedule(const ScheduleConfig& cfg) {
  if (cfg.raw_dim <= 0) throw ConfigError("schedule.raw_dim must be positive", "schedule.raw_dim");
  if (cfg.classes_per_step.empty())
    throw ConfigError("schedule.classes_per_step must be nonempty", "schedule.classes_per_step");
  if (cfg.drift_pattern.empty())
    throw ConfigError("schedule.drift.pattern must be nonempty", "schedule.drift.pattern");

  TaskSchedule s;
  s.raw_dim = cfg.raw_dim;
  s.noise_std = cfg.noise_std;
  s.samples_per_step = cfg.samples_per_step;
  s.rho_old = cfg.rho_old;

  int next_class = 0;
  for (int count : cfg.classes_per_step) {
    if (count <= 0) throw ConfigError("classes_per_step entries must be positive",
                                      "schedule.classes_per_step");
    std::vector<int> cs;
    for (int i = 0; i < count; ++i) cs.push_back(next_class++);
    s.class_sets.push_back(std::move(cs));
  }

  if (cfg.timestamps.empty()) {
    for (int t = 0; t < s.num_steps(); ++t) s.timestamps.push_back(t);
  } else {
    if (cfg.timestamps.size() != s.class_sets.size())
      throw ConfigError("schedule.timestamps must have one entry per step",
                        "schedule.timestamps");
    s.timestamps = cfg.timestamps;
  }

  // Deterministic layout: well-separated base means on a shell, drift
  // directions from the same stream.
  Rng rng(cfg.layout_seed);
  std::vector<Vec> bases;
  for (int c = 0; c < next_class; ++c) {
    Vec best;
    double best_sep = -1.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      Vec v(cfg.raw_dim);
      for (double& x : v) x = rng.normal();
      v = scale(v, cfg.base_radius * (0.9 + 0.2 * rng.uniform()) /
                       std::max(norm2(v), 1e-12));
      double sep = std::numeric_limits<double>::infinity();
      for (const Vec& b : bases) sep = std::min(sep, norm2(sub(v, b)));
      if (sep > best_sep) {
        best_sep = sep;
        best = std::move(v);
      }
      if (best_sep >= 0.9 * cfg.base_radius) break;
    }
    bases.push_back(std::move(best));
  }

  if (cfg.drift_coherence < 0.0 || cfg.drift_coherence > 1.0)
    throw ConfigError("schedule.drift.coherence must be in [0,1]",
                      "schedule.drift.coherence");
  Vec shared_dir(cfg.raw_dim);
  for (double& x : shared_dir) x = rng.normal();
  shared_dir = scale(shared_dir, 1.0 / std::max(norm2(shared_dir), 1e-12));

  for (int c = 0; c < next_class; ++c) {
    DriftSpec d;
    if (auto it = cfg.drift_overrides.find(c); it != cfg.drift_overrides.end()) {
      d = it->second;
      if (d.base_mean.empty()) d.base_mean = bases[c];
      s.drift[c] = std::move(d);
      continue;
    }
    d.base_mean = bases[c];
    const std::string& kind = cfg.drift_pattern[c % cfg.drift_pattern.size()];
    d.kind = drift_kind_from_name(kind, "schedule.drift.pattern");
    Vec dir(cfg.raw_dim);
    for (double& x : dir) x = rng.normal();
    dir = scale(dir, (1.0 - cfg.drift_coherence) / std::max(norm2(dir), 1e-12));
    axpy(cfg.drift_coherence, shared_dir, dir);
    dir = scale(dir, cfg.drift_magnitude / std::max(norm2(dir), 1e-12));
    if (d.kind == DriftKind::kLinear) {
      d.drift_vector = dir;
    } else if (d.kind == DriftKind::kSinusoidal) {
      d.amplitude = dir;
      d.period = cfg.drift_period;
    } else if (d.kind == DriftKind::kPiecewise) {
      throw ConfigError("piecewise drift requires an explicit drift_overrides entry",
                        "schedule.drift.pattern");
    }
    s.drift[c] = std::move(d);
  }

  s.validate();
  return s;
}

namespace {

Json drift_override_to_json(const DriftSpec& d) {
  Json j;
  j["kind"] = drift_kind_name(d.kind);
  j["base_mean"] = d.base_mean;
  if (d.kind == DriftKind::kLinear) j["drift_vector"] = d.drift_vector;
  if (d.kind == DriftKind::kSinusoidal) {
    j["amplitude"] = d.amplitude;
    j["period"] = d.period;
  }
  if (d.kind == DriftKind::kPiecewise) {
    j["breakpoints"] = d.breakpoints;
    Json offs = Json::array();
    for (const Vec& o : d.segment_offsets) offs.push_back(o);
    j["segment_offsets"] = offs;
  }
  return j;
}

DriftSpec drift_override_from_json(const Json& j, const std::string& where) {
  reject_unknown(j, {"kind", "base_mean", "drift_vector", "amplitude", "period",
                     "breakpoints", "segment_offsets"},
                 where);
  DriftSpec d;
  std::string kind = "static";
  read_field(j, "kind", kind, where);
  d.kind = drift_kind_from_name(kind, where);
  if (j.contains("base_mean")) d.base_mean = read_vec(j.at("base_mean"), where);
  if (j.contains("drift_vector")) d.drift_vector = read_vec(j.at("drift_vector"), where);
  if (j.contains("amplitude")) d.amplitude = read_vec(j.at("amplitude"), where);
  read_field(j, "period", d.period, where);
  if (j.contains("breakpoints"))
    d.breakpoints = j.at("breakpoints").get<std::vector<double>>();
  if (j.contains("segment_offsets"))
    for (const Json& o : j.at("segment_offsets")) d.segment_offsets.push_back(read_vec(o, where));
  return d;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what(), "");
  }
  reject_unknown(root, {"seed", "variant", "schedule", "model", "train", "memory", "outputs"},
                 "config");

  RunConfig cfg;
  read_field(root, "seed", cfg.seed, "config");
  if (root.contains("variant")) {
    const std::string name = root.at("variant").get<std::string>();
    const auto v = variant_from_name(name);
    if (!v) throw ConfigError("unknown variant '" + name + "'", "config.variant");
    cfg.variant = *v;
  }

  if (root.contains("schedule")) {
    const Json& s = root.at("schedule");
    reject_unknown(s,
                   {"raw_dim", "classes_per_step", "timestamps", "samples_per_step",
                    "noise_std", "rho_old", "layout_seed", "base_radius", "drift",
                    "drift_overrides", "time_shuffle_alpha"},
                   "schedule");
    read_field(s, "raw_dim", cfg.schedule.raw_dim, "schedule");
    read_field(s, "classes_per_step", cfg.schedule.classes_per_step, "schedule");
    read_field(s, "timestamps", cfg.schedule.timestamps, "schedule");
    read_field(s, "samples_per_step", cfg.schedule.samples_per_step, "schedule");
    read_field(s, "noise_std", cfg.schedule.noise_std, "schedule");
    read_field(s, "rho_old", cfg.schedule.rho_old, "schedule");
    read_field(s, "layout_seed", cfg.schedule.layout_seed, "schedule");
    read_field(s, "base_radius", cfg.schedule.base_radius, "schedule");
    read_field(s, "time_shuffle_alpha", cfg.train.time_shuffle_alpha, "schedule");
    if (s.contains("drift")) {
      const Json& d = s.at("drift");
      reject_unknown(d, {"pattern", "magnitude", "period", "coherence"}, "schedule.drift");
      read_field(d, "pattern", cfg.schedule.drift_pattern, "schedule.drift");
      read_field(d, "magnitude", cfg.schedule.drift_magnitude, "schedule.drift");
      read_field(d, "period", cfg.schedule.drift_period, "schedule.drift");
      read_field(d, "coherence", cfg.schedule.drift_coherence, "schedule.drift");
    }
    if (s.contains("drift_overrides")) {
      for (const auto& [key, value] : s.at("drift_overrides").items()) {
        int cls = 0;
        try {
          cls = std::stoi(key);
        } catch (...) {
          throw ConfigError("drift_overrides keys must be class ids",
                            "schedule.drift_overrides");
        }
        cfg.schedule.drift_overrides[cls] =
            drift_override_from_json(value, "schedule.drift_overrides." + key);
      }
    }
  }

  if (root.contains("model")) {
    const Json& m = root.at("model");
    reject_unknown(m,
                   {"encoder_hidden", "feature_dim", "head_init_std", "flow_hidden",
                    "time_encoding"},
                   "model");
    read_field(m, "encoder_hidden", cfg.train.encoder_hidden, "model");
    read_field(m, "feature_dim", cfg.train.feat_dim, "model");
    read_field(m, "head_init_std", cfg.train.head_init_std, "model");
    read_field(m, "flow_hidden", cfg.train.flow_hidden, "model");
    if (m.contains("time_encoding")) {
      const Json& te = m.at("time_encoding");
      reject_unknown(te, {"d_tau", "omega0", "omega_base", "per_class"},
                     "model.time_encoding");
      read_field(te, "d_tau", cfg.train.time_encoding.d_tau, "model.time_encoding");
      read_field(te, "omega0", cfg.train.time_encoding.omega0, "model.time_encoding");
      read_field(te, "omega_base", cfg.train.time_encoding.omega_base,
                 "model.time_encoding");
      read_field(te, "per_class", cfg.train.time_encoding.per_class,
                 "model.time_encoding");
    }
  }

  if (root.contains("train")) {
    const Json& t = root.at("train");
    reject_unknown(t,
                   {"iterations_per_step", "batch_size", "base_lr", "warmup_start_lr",
                    "warmup_iterations", "momentum", "weight_decay", "poly_power",
                    "clip_norm", "ema_alpha", "lambda_dist", "lambda_flow",
                    "lambda_curve", "lambda_sep", "margin", "distill_temperature",
                    "eval_per_class", "eval_time_mode", "log_every"},
                   "train");
    read_field(t, "iterations_per_step", cfg.train.iterations_per_step, "train");
    read_field(t, "batch_size", cfg.train.batch_size, "train");
    read_field(t, "base_lr", cfg.train.base_lr, "train");
    read_field(t, "warmup_start_lr", cfg.train.warmup_start_lr, "train");
    read_field(t, "warmup_iterations", cfg.train.warmup_iterations, "train");
    read_field(t, "momentum", cfg.train.momentum, "train");
    read_field(t, "weight_decay", cfg.train.weight_decay, "train");
    read_field(t, "poly_power", cfg.train.poly_power, "train");
    read_field(t, "clip_norm", cfg.train.clip_norm, "train");
    read_field(t, "ema_alpha", cfg.train.ema_alpha, "train");
    read_field(t, "lambda_dist", cfg.train.weights.lambda_dist, "train");
    read_field(t, "lambda_flow", cfg.train.weights.lambda_flow, "train");
    read_field(t, "lambda_curve", cfg.train.weights.lambda_curve, "train");
    read_field(t, "lambda_sep", cfg.train.weights.lambda_sep, "train");
    read_field(t, "margin", cfg.train.weights.margin, "train");
    read_field(t, "distill_temperature", cfg.train.weights.distill_temperature, "train");
    read_field(t, "eval_per_class", cfg.train.eval_per_class, "train");
    if (t.contains("eval_time_mode")) {
      const std::string mode = t.at("eval_time_mode").get<std::string>();
      if (mode == "current")
        cfg.train.eval_time_mode = EvalTimeMode::kCurrent;
      else if (mode == "introduction")
        cfg.train.eval_time_mode = EvalTimeMode::kIntroduction;
      else if (mode == "span")
        cfg.train.eval_time_mode = EvalTimeMode::kSpan;
      else
        throw ConfigError("unknown eval_time_mode '" + mode + "'", "train.eval_time_mode");
    }
    read_field(t, "log_every", cfg.train.log_every, "train");
  }

  if (root.contains("memory")) {
    const Json& m = root.at("memory");
    reject_unknown(m, {"budget_per_class", "strategy"}, "memory");
    read_field(m, "budget_per_class", cfg.train.memory_budget, "memory");
    if (m.contains("strategy")) {
      const std::string strat = m.at("strategy").get<std::string>();
      if (strat == "herding")
        cfg.train.memory_strategy = MemoryStrategy::kHerding;
      else if (strat == "random")
        cfg.train.memory_strategy = MemoryStrategy::kRandom;
      else
        throw ConfigError("unknown memory strategy '" + strat + "'", "memory.strategy");
    }
  }

  if (root.contains("outputs")) {
    const Json& o = root.at("outputs");
    reject_unknown(o, {"write_checkpoints", "write_run_log"}, "outputs");
    read_field(o, "write_checkpoints", cfg.write_checkpoints, "outputs");
    read_field(o, "write_run_log", cfg.write_run_log, "outputs");
  }

  cfg.train.seed = cfg.seed;
  cfg.train.variant = cfg.variant;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string(), "");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string echo_run_config(const RunConfig& cfg) {
  Json root;
  root["seed"] = cfg.seed;
  root["variant"] = variant_name(cfg.variant);

  Json s;
  s["raw_dim"] = cfg.schedule.raw_dim;
  s["classes_per_step"] = cfg.schedule.classes_per_step;
  Json ts = Json::array();
  if (cfg.schedule.timestamps.empty()) {
    for (std::size_t t = 0; t < cfg.schedule.classes_per_step.size(); ++t)
      ts.push_back(static_cast<double>(t));
  } else {
    for (double t : cfg.schedule.timestamps) ts.push_back(t);
  }
  s["timestamps"] = ts;
  s["samples_per_step"] = cfg.schedule.samples_per_step;
  s["noise_std"] = cfg.schedule.noise_std;
  s["rho_old"] = cfg.schedule.rho_old;
  s["layout_seed"] = cfg.schedule.layout_seed;
  s["base_radius"] = cfg.schedule.base_radius;
  s["time_shuffle_alpha"] = cfg.train.time_shuffle_alpha;
  Json drift;
  drift["pattern"] = cfg.schedule.drift_pattern;
  drift["magnitude"] = cfg.schedule.drift_magnitude;
  drift["period"] = cfg.schedule.drift_period;
  drift["coherence"] = cfg.schedule.drift_coherence;
  s["drift"] = drift;
  if (!cfg.schedule.drift_overrides.empty()) {
    Json ov;
    for (const auto& [cls, spec] : cfg.schedule.drift_overrides)
      ov[std::to_string(cls)] = drift_override_to_json(spec);
    s["drift_overrides"] = ov;
  }
  root["schedule"] = s;

  Json m;
  m["encoder_hidden"] = cfg.train.encoder_hidden;
  m["feature_dim"] = cfg.train.feat_dim;
  m["head_init_std"] = cfg.train.head_init_std;
  m["flow_hidden"] = cfg.train.flow_hidden;
  Json te;
  te["d_tau"] = cfg.train.time_encoding.d_tau;
  te["omega0"] = cfg.train.time_encoding.omega0;
  te["omega_base"] = cfg.train.time_encoding.omega_base;
  te["per_class"] = cfg.train.time_encoding.per_class;
  m["time_encoding"] = te;
  root["model"] = m;

  Json t;
  t["iterations_per_step"] = cfg.train.iterations_per_step;
  t["batch_size"] = cfg.train.batch_size;
  t["base_lr"] = cfg.train.base_lr;
  t["warmup_start_lr"] = cfg.train.warmup_start_lr;
  t["warmup_iterations"] = cfg.train.warmup_iterations;
  t["momentum"] = cfg.train.momentum;
  t["weight_decay"] = cfg.train.weight_decay;
  t["poly_power"] = cfg.train.poly_power;
  t["clip_norm"] = cfg.train.clip_norm;
  t["ema_alpha"] = cfg.train.ema_alpha;
  t["lambda_dist"] = cfg.train.weights.lambda_dist;
  t["lambda_flow"] = cfg.train.weights.lambda_flow;
  t["lambda_curve"] = cfg.train.weights.lambda_curve;
  t["lambda_sep"] = cfg.train.weights.lambda_sep;
  t["margin"] = cfg.train.weights.margin;
  t["distill_temperature"] = cfg.train.weights.distill_temperature;
  t["eval_per_class"] = cfg.train.eval_per_class;
  t["eval_time_mode"] = cfg.train.eval_time_mode == EvalTimeMode::kCurrent
                            ? "current"
                            : cfg.train.eval_time_mode == EvalTimeMode::kIntroduction
                                  ? "introduction"
                                  : "span";
  t["log_every"] = cfg.train.log_every;
  root["train"] = t;

  Json mem;
  mem["budget_per_class"] = cfg.train.memory_budget;
  mem["strategy"] =
      cfg.train.memory_strategy == MemoryStrategy::kHerding ? "herding" : "random";
  root["memory"] = mem;

  Json outs;
  outs["write_checkpoints"] = cfg.write_checkpoints;
  outs["write_run_log"] = cfg.write_run_log;
  root["outputs"] = outs;

  return root.dump(2) + "\n";
}

std::string schedule_signature(const TaskSchedule& schedule) {
  Json j;
  j["raw_dim"] = schedule.raw_dim;
  Json sets = Json::array();
  for (const auto& cs : schedule.class_sets) sets.push_back(cs);
  j["class_sets"] = sets;
  j["timestamps"] = schedule.timestamps;
  j["noise_std"] = schedule.noise_std;
  j["samples_per_step"] = schedule.samples_per_step;
  j["rho_old"] = schedule.rho_old;
  Json drift;
  for (const auto& [cls, d] : schedule.drift)
    drift[std::to_string(cls)] = drift_override_to_json(d);
  j["drift"] = drift;
  return j.dump();
}

RunConfig standard_benchmark_config() {
  RunConfig cfg;
  cfg.seed = 1;
  cfg.schedule.raw_dim = 4;
  cfg.schedule.classes_per_step = {3, 1, 1, 1};
  cfg.schedule.samples_per_step = 1024;
  cfg.schedule.noise_std = 1.0;
  // Old classes persist at a low rate while their distributions drift, so
  // retention requires tracking the motion rather than replaying one slice.
  cfg.schedule.rho_old = 0.05;
  cfg.schedule.layout_seed = 9001;
  cfg.schedule.base_radius = 2.0;
  cfg.schedule.drift_pattern = {"linear", "sinusoidal"};
  cfg.schedule.drift_magnitude = 1.3;
  cfg.schedule.drift_period = 4.0;
  cfg.train.feat_dim = 8;
  cfg.train.encoder_hidden = 32;
  cfg.train.flow_hidden = 256;
  cfg.train.iterations_per_step = 2000;
  cfg.train.warmup_iterations = 100;
  cfg.train.batch_size = 64;
  cfg.train.base_lr = 0.05;
  cfg.train.memory_budget = 20;
  cfg.train.memory_strategy = MemoryStrategy::kHerding;
  cfg.train.eval_per_class = 500;
  // Every class is scored against the same fixed validation set spanning the
  // full acquisition period (the domain-incremental protocol).
  cfg.train.eval_time_mode = EvalTimeMode::kSpan;
  return cfg;
}

RunConfig stationary_benchmark_config() {
  RunConfig cfg = standard_benchmark_config();
  cfg.schedule.drift_pattern = {"static"};
  cfg.schedule.drift_magnitude = 0.0;
  return cfg;
}

}  // namespace protoflow
