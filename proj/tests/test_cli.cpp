#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "protoflow/cli.hpp"
#include "protoflow/config.hpp"
#include "protoflow/errors.hpp"
#include "protoflow/output.hpp"

using namespace protoflow;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"protoflow"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("protoflow_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string tiny_config_json() {
  return R"({
  "seed": 3,
  "schedule": {
    "raw_dim": 3,
    "classes_per_step": [2, 1],
    "samples_per_step": 96,
    "noise_std": 0.5
  },
  "model": { "feature_dim": 4, "encoder_hidden": 16, "flow_hidden": 32 },
  "train": {
    "iterations_per_step": 80,
    "warmup_iterations": 10,
    "batch_size": 24,
    "eval_per_class": 80,
    "log_every": 5
  },
  "memory": { "budget_per_class": 8, "strategy": "herding" }
})";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config: defaults materialize and echoes re-parse identically") {
  const RunConfig cfg = parse_run_config(tiny_config_json());
  CHECK(cfg.train.weights.lambda_curve == 0.5);  // untouched default
  CHECK(cfg.train.iterations_per_step == 80);
  const std::string echo = echo_run_config(cfg);
  const RunConfig again = parse_run_config(echo);
  CHECK(echo_run_config(again) == echo);
}

TEST_CASE("config: unknown keys are rejected with a field path") {
  try {
    parse_run_config(R"({"train": {"learning_rate": 0.1}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field_path == std::string("train.learning_rate"));
  }
  CHECK_THROWS_AS(parse_run_config(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("not json"), ConfigError);
}

TEST_CASE("cli run: missing config file exits 2") {
  const fs::path out = fresh_dir("missing_cfg");
  CHECK(run_cli({"run", "--config", "/nonexistent/path.json", "--out",
                 (out / "r").string()}) == kExitUsage);
}

TEST_CASE("cli run: minimal config produces a complete bundle") {
  const fs::path dir = fresh_dir("run_bundle");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << tiny_config_json();
  }
  const fs::path run_dir = dir / "run";
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out", run_dir.string()}) ==
          kExitOk);
  for (const char* name :
       {"config_echo.json", "REFERENCE.md", "record.json", "metrics_summary.csv",
        "metrics_per_class.csv", "iou_history.csv", "angles.csv", "trajectories.csv",
        "trajectories.jsonl", "run_log.jsonl"})
    CHECK(fs::exists(run_dir / name));
  CHECK(fs::exists(run_dir / "checkpoints" / "step_0.txt"));
  CHECK(fs::exists(run_dir / "checkpoints" / "step_1.txt"));

  // Refuses to clobber without --overwrite, allows it with.
  CHECK(run_cli({"run", "--config", cfg_path.string(), "--out", run_dir.string()}) ==
        kExitUsage);
  CHECK(run_cli({"run", "--config", cfg_path.string(), "--out", run_dir.string(),
                 "--overwrite"}) == kExitOk);
}

TEST_CASE("cli run: identical config and seed give byte-identical exports") {
  const fs::path dir = fresh_dir("determinism");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << tiny_config_json();
  }
  const fs::path a = dir / "a";
  const fs::path b = dir / "b";
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out", a.string()}) == kExitOk);
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out", b.string()}) == kExitOk);
  CHECK(slurp(a / "metrics_summary.csv") == slurp(b / "metrics_summary.csv"));
  CHECK(slurp(a / "trajectories.csv") == slurp(b / "trajectories.csv"));
  CHECK(slurp(a / "trajectories.jsonl") == slurp(b / "trajectories.jsonl"));

  // Round-trip: running the echoed config reproduces the run byte-for-byte.
  const fs::path c = dir / "c";
  REQUIRE(run_cli({"run", "--config", (a / "config_echo.json").string(), "--out",
                   c.string()}) == kExitOk);
  CHECK(slurp(a / "metrics_summary.csv") == slurp(c / "metrics_summary.csv"));
}

TEST_CASE("cli run: seed override changes the outputs") {
  const fs::path dir = fresh_dir("seed_override");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << tiny_config_json();
  }
  const fs::path a = dir / "a";
  const fs::path b = dir / "b";
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out", a.string()}) == kExitOk);
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out", b.string(), "--seed",
                   "99"}) == kExitOk);
  CHECK(slurp(a / "metrics_summary.csv") != slurp(b / "metrics_summary.csv"));
}

TEST_CASE("cli analyze: matched schedules compare, mismatched exit 2") {
  const fs::path dir = fresh_dir("analyze");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << tiny_config_json();
  }
  const fs::path a = dir / "full";
  const fs::path b = dir / "ft";
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out", a.string()}) == kExitOk);
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out", b.string(),
                   "--variant", "finetune"}) == kExitOk);
  CHECK(run_cli({"analyze", "--a", a.string(), "--b", b.string()}) == kExitOk);

  // Different schedule (extra class): signatures differ.
  RunConfig other = parse_run_config(tiny_config_json());
  other.schedule.classes_per_step = {2, 2};
  const fs::path other_cfg = dir / "other.json";
  {
    std::ofstream out(other_cfg);
    out << echo_run_config(other);
  }
  const fs::path c = dir / "other_run";
  REQUIRE(run_cli({"run", "--config", other_cfg.string(), "--out", c.string()}) == kExitOk);
  CHECK(run_cli({"analyze", "--a", a.string(), "--b", c.string()}) == kExitUsage);
}

TEST_CASE("cli run: task-order permutation flag") {
  const fs::path dir = fresh_dir("order");
  const fs::path cfg_path = dir / "config.json";
  RunConfig cfg = parse_run_config(tiny_config_json());
  cfg.schedule.classes_per_step = {2, 1, 1};
  {
    std::ofstream out(cfg_path);
    out << echo_run_config(cfg);
  }
  const fs::path run_dir = dir / "run";
  CHECK(run_cli({"run", "--config", cfg_path.string(), "--out", run_dir.string(),
                 "--order", "2,1"}) == kExitOk);
  CHECK(run_cli({"run", "--config", cfg_path.string(), "--out",
                 (dir / "bad").string(), "--order", "9,1"}) == kExitUsage);
}

TEST_CASE("cli gradcheck: quick audit exits 0") {
  CHECK(run_cli({"gradcheck", "--seeds", "3"}) == kExitOk);
}

TEST_CASE("cli theory: reduced sweep exits 0 and writes a report") {
  const fs::path out = fresh_dir("theory");
  CHECK(run_cli({"theory", "--worlds", "6", "--mc-n", "8000", "--trajectories", "60",
                 "--lipschitz-grid", "120", "--out", out.string()}) == kExitOk);
  CHECK(fs::exists(out / "theory_report.jsonl"));
}

TEST_CASE("cli sweep: tiny grid writes the heat-map CSV") {
  const fs::path dir = fresh_dir("sweep");
  const fs::path cfg_path = dir / "config.json";
  RunConfig cfg = parse_run_config(tiny_config_json());
  cfg.train.iterations_per_step = 40;
  cfg.train.eval_per_class = 40;
  cfg.train.log_every = 0;
  {
    std::ofstream out(cfg_path);
    out << echo_run_config(cfg);
  }
  const fs::path out_dir = dir / "sweep_out";
  REQUIRE(run_cli({"sweep", "--config", cfg_path.string(), "--out", out_dir.string(),
                   "--grid", "0,0.5x0,0.1", "--seeds", "3"}) == kExitOk);
  const std::string csv = slurp(out_dir / "sweep.csv");
  CHECK(csv.find("lambda_curve,lambda_sep,miou_all_mean,forget_mean,seeds") == 0);
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 5);  // header + 4 cells
}

TEST_CASE("cli ablate: writes per-variant bundles and the comparison table") {
  const fs::path dir = fresh_dir("ablate");
  RunConfig cfg = parse_run_config(tiny_config_json());
  cfg.train.iterations_per_step = 40;
  cfg.train.eval_per_class = 40;
  cfg.train.log_every = 0;
  cfg.write_checkpoints = false;
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << echo_run_config(cfg);
  }
  const fs::path out_dir = dir / "ablation";
  REQUIRE(run_cli({"ablate", "--config", cfg_path.string(), "--out",
                   out_dir.string()}) == kExitOk);
  const std::string table = slurp(out_dir / "ablation_summary.csv");
  CHECK(table.find("variant,seed,miou_all") == 0);
  for (const char* v : {"full", "no_field", "no_curve", "no_sep", "no_time", "no_norm"}) {
    CHECK(table.find(v) != std::string::npos);
    CHECK(fs::exists(out_dir / v / "record.json"));
  }
}

TEST_CASE("cli run: time-shuffle override changes trajectory exports") {
  const fs::path dir = fresh_dir("alpha");
  const fs::path cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << tiny_config_json();
  }
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out",
                   (dir / "a0").string()}) == kExitOk);
  REQUIRE(run_cli({"run", "--config", cfg_path.string(), "--out",
                   (dir / "a1").string(), "--alpha", "1.0"}) == kExitOk);
  CHECK(slurp(dir / "a0" / "trajectories.csv") != slurp(dir / "a1" / "trajectories.csv"));
}

TEST_CASE("config: drift overrides round-trip through the echo") {
  RunConfig cfg = parse_run_config(tiny_config_json());
  DriftSpec pw;
  pw.kind = DriftKind::kPiecewise;
  pw.base_mean = {0.0, 0.0, 0.0};
  pw.breakpoints = {0.5};
  pw.segment_offsets = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  cfg.schedule.drift_overrides[1] = pw;
  const std::string echo = echo_run_config(cfg);
  const RunConfig again = parse_run_config(echo);
  REQUIRE(again.schedule.drift_overrides.count(1) == 1);
  CHECK(again.schedule.drift_overrides.at(1).kind == DriftKind::kPiecewise);
  CHECK(again.schedule.drift_overrides.at(1).segment_offsets.size() == 2);
  // The override survives into the built schedule.
  const TaskSchedule s = build_schedule(again.schedule);
  CHECK(class_mean_at(s, 1, 0.75)[0] ==
        doctest::Approx(pw.base_mean[0] + 1.0));
}
