#include "protoflow/cli.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protoflow/config.hpp"
#include "protoflow/errors.hpp"
#include "protoflow/gradcheck.hpp"
#include "protoflow/output.hpp"
#include "protoflow/parallel.hpp"
#include "protoflow/theory.hpp"
#include "protoflow/trainer.hpp"

namespace protoflow {

namespace {

namespace fs = std::filesystem;

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    try {
      out.push_back(std::stod(item));
    } catch (...) {
      throw ArgumentError("bad " + what + " entry: '" + item + "'");
    }
  if (out.empty()) throw ArgumentError(what + " must be nonempty");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    try {
      out.push_back(std::stoull(item));
    } catch (...) {
      throw ArgumentError("bad seed entry: '" + item + "'");
    }
  if (out.empty()) throw ArgumentError("seed list must be nonempty");
  return out;
}

void require_writable(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !overwrite)
    throw ArgumentError("output directory exists and is not empty (use --overwrite): " +
                        dir.string());
}

struct RunArgs {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  std::string variant;
  double alpha = -1.0;
  std::string order;
  bool overwrite = false;
};

RunConfig load_and_override(const RunArgs& args) {
  if (!fs::exists(args.config_path))
    throw ConfigError("config file not found: " + args.config_path, "");
  RunConfig cfg = load_run_config(args.config_path);
  if (args.seed >= 0) {
    cfg.seed = static_cast<std::uint64_t>(args.seed);
    cfg.train.seed = cfg.seed;
  }
  if (!args.variant.empty()) {
    const auto v = variant_from_name(args.variant);
    if (!v) throw ConfigError("unknown variant '" + args.variant + "'", "variant");
    cfg.variant = *v;
    cfg.train.variant = *v;
  }
  if (args.alpha >= 0.0) cfg.train.time_shuffle_alpha = args.alpha;
  return cfg;
}

int cmd_run(const RunArgs& args) {
  RunConfig cfg = load_and_override(args);
  TaskSchedule schedule = build_schedule(cfg.schedule);
  if (!args.order.empty()) {
    std::vector<int> order;
    for (double v : parse_double_list(args.order, "order"))
      order.push_back(static_cast<int>(v));
    schedule = permute_tasks(schedule, order);
  }
  require_writable(args.out_dir, args.overwrite);
  const RunRecord record = run_experiment(schedule, cfg.train);
  write_run_bundle(args.out_dir, record, cfg);
  std::cout << "run " << variant_name(record.variant) << " seed " << record.seed
            << ": miou_all=" << format_double(record.metrics.miou_all);
  if (record.metrics.forgetting)
    std::cout << " F=" << format_double(*record.metrics.forgetting);
  std::cout << " (" << format_double(record.wall_seconds) << "s) -> " << args.out_dir
            << "\n";
  return kExitOk;
}

int cmd_ablate(const RunArgs& args) {
  RunConfig cfg = load_and_override(args);
  const TaskSchedule schedule = build_schedule(cfg.schedule);
  require_writable(args.out_dir, args.overwrite);
  const auto records = run_ablation_suite(schedule, cfg.train);

  std::string table = "variant,seed,miou_all,miou_old,miou_new,forget,min_cos_margin\n";
  for (const auto& [variant, record] : records) {
    RunConfig echo_cfg = cfg;
    echo_cfg.variant = variant;
    echo_cfg.train.variant = variant;
    write_run_bundle(fs::path(args.out_dir) / variant_name(variant), record, echo_cfg);
    table += variant_name(variant) + "," + std::to_string(record.seed) + "," +
             format_double(record.metrics.miou_all) + "," +
             format_double(record.metrics.miou_old) + "," +
             format_double(record.metrics.miou_new) + ",";
    table += record.metrics.forgetting ? format_double(*record.metrics.forgetting)
                                       : std::string();
    table += "," + format_double(record.metrics.min_cos_margin) + "\n";
  }
  atomic_write(fs::path(args.out_dir) / "ablation_summary.csv", table);
  std::cout << table;
  return kExitOk;
}

int cmd_sweep(const RunArgs& args, const std::string& grid, const std::string& seeds) {
  RunConfig cfg = load_and_override(args);
  const TaskSchedule schedule = build_schedule(cfg.schedule);
  require_writable(args.out_dir, args.overwrite);

  const auto x = grid.find('x');
  if (x == std::string::npos)
    throw ArgumentError("grid must be '<curve list>x<sep list>', e.g. 0,0.1,0.5x0,0.1");
  const std::vector<double> curve_grid = parse_double_list(grid.substr(0, x), "grid");
  const std::vector<double> sep_grid = parse_double_list(grid.substr(x + 1), "grid");
  const std::vector<std::uint64_t> seed_list =
      seeds.empty() ? std::vector<std::uint64_t>{cfg.seed} : parse_seed_list(seeds);

  const auto cells = run_sweep(schedule, cfg.train, curve_grid, sep_grid, seed_list);

  std::string csv = "lambda_curve,lambda_sep,miou_all_mean,forget_mean,seeds\n";
  for (const SweepCell& cell : cells)
    csv += format_double(cell.lambda_curve) + "," + format_double(cell.lambda_sep) + "," +
           format_double(cell.miou_mean) + "," + format_double(cell.forget_mean) + "," +
           std::to_string(cell.miou_all.size()) + "\n";
  atomic_write(fs::path(args.out_dir) / "sweep.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_theory(const std::string& out_dir, int worlds, std::int64_t mc_n,
               int trajectories, int grid, std::int64_t seed, bool overwrite) {
  TheorySuiteOptions opt;
  opt.worlds = worlds;
  opt.mc_samples = mc_n;
  opt.trajectory_sweep = trajectories;
  opt.lipschitz_grid = grid;
  opt.seed = static_cast<std::uint64_t>(seed);
  const TheorySuiteReport report = run_theory_suite(opt);

  if (!out_dir.empty()) {
    require_writable(out_dir, overwrite);
    atomic_write(fs::path(out_dir) / "theory_report.jsonl", theory_report_jsonl(report));
  }
  std::cout << "margin-path violations:     " << report.margin_path_violations << "\n"
            << "path-curvature violations:  " << report.path_curvature_violations << "\n"
            << "lipschitz violations: " << report.lipschitz_violations << "\n"
            << "margin-bound violations:    " << report.margin_bound_violations << "\n"
            << "forgetting-bound violations: " << report.forgetting_bound_violations << "\n"
            << "regret-bound violations:    " << report.regret_bound_violations << "\n"
            << "exactness violations: " << report.exactness_violations << " (max |z|="
            << format_double(report.max_exactness_z) << ", " << report.two_class_worlds
            << " two-class worlds, " << report.escalations << " escalations)\n";
  return report.pass() ? kExitOk : kExitViolation;
}

int cmd_gradcheck(int seeds, double eps, double tol) {
  const GradCheckReport report = run_gradcheck_suite(seeds, eps, tol);
  std::cout << "path, max_rel_err\n";
  for (const auto& [name, err] : report.max_rel_err)
    std::cout << name << ", " << format_double(err) << "\n";
  std::cout << "tolerance " << format_double(report.tolerance) << ", " << report.seeds
            << " seeds, " << format_double(report.seconds) << "s\n";
  return report.pass() ? kExitOk : kExitViolation;
}

int cmd_analyze(const std::string& dir_a, const std::string& dir_b,
                const std::string& out_dir, bool overwrite) {
  const LoadedRecord a = load_record(dir_a);
  const LoadedRecord b = load_record(dir_b);
  if (a.schedule_signature != b.schedule_signature)
    throw ArgumentError("analyze: run directories use different schedules");
  const DeltaReport report = delta_analysis(a.per_class, b.per_class);
  const std::string csv = delta_csv(report);
  if (!out_dir.empty()) {
    require_writable(out_dir, overwrite);
    atomic_write(fs::path(out_dir) / "delta.csv", csv);
  }
  std::cout << csv;
  std::cout << "favorable quadrant: " << report.favorable_count << "/"
            << report.defined_count << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"ProtoFlow: time-driven prototype dynamics on synthetic streams"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "train one configuration, write a run bundle");
  run->add_option("--config", run_args.config_path, "run config JSON")->required();
  run->add_option("--out", run_args.out_dir, "output directory")->required();
  run->add_option("--seed", run_args.seed, "seed override");
  run->add_option("--variant", run_args.variant, "variant override");
  run->add_option("--alpha", run_args.alpha, "time-shuffle fraction override");
  run->add_option("--order", run_args.order, "task permutation of steps 1..T, e.g. 2,1,3");
  run->add_flag("--overwrite", run_args.overwrite, "allow writing into a non-empty directory");

  RunArgs ablate_args;
  CLI::App* ablate = app.add_subcommand("ablate", "run the single-factor ablation suite");
  ablate->add_option("--config", ablate_args.config_path)->required();
  ablate->add_option("--out", ablate_args.out_dir)->required();
  ablate->add_option("--seed", ablate_args.seed);
  ablate->add_flag("--overwrite", ablate_args.overwrite);

  RunArgs sweep_args;
  std::string sweep_grid = "0,0.1,0.3,0.5,1.0x0,0.05,0.1,0.2";
  std::string sweep_seeds;
  CLI::App* sweep = app.add_subcommand("sweep", "lambda_curve x lambda_sep grid sweep");
  sweep->add_option("--config", sweep_args.config_path)->required();
  sweep->add_option("--out", sweep_args.out_dir)->required();
  sweep->add_option("--grid", sweep_grid, "'<curve list>x<sep list>'");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seed list");
  sweep->add_flag("--overwrite", sweep_args.overwrite);

  std::string theory_out;
  int theory_worlds = 200;
  std::int64_t theory_mc = 100000;
  int theory_traj = 1000;
  int theory_grid = 1000;
  std::int64_t theory_seed = 7;
  bool theory_overwrite = false;
  CLI::App* theory = app.add_subcommand("theory", "run the bound-verification suite");
  theory->add_option("--out", theory_out, "report directory (optional)");
  theory->add_option("--worlds", theory_worlds);
  theory->add_option("--mc-n", theory_mc);
  theory->add_option("--trajectories", theory_traj);
  theory->add_option("--lipschitz-grid", theory_grid);
  theory->add_option("--seed", theory_seed);
  theory->add_flag("--overwrite", theory_overwrite);

  int grad_seeds = 20;
  double grad_eps = 1e-5;
  double grad_tol = 1e-4;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  gradcheck->add_option("--seeds", grad_seeds);
  gradcheck->add_option("--eps", grad_eps);
  gradcheck->add_option("--tol", grad_tol);

  std::string analyze_a, analyze_b, analyze_out;
  bool analyze_overwrite = false;
  CLI::App* analyze =
      app.add_subcommand("analyze", "per-class delta analysis between two run bundles");
  analyze->add_option("--a", analyze_a, "run directory A")->required();
  analyze->add_option("--b", analyze_b, "run directory B")->required();
  analyze->add_option("--out", analyze_out, "report directory (optional)");
  analyze->add_flag("--overwrite", analyze_overwrite);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (ablate->parsed()) return cmd_ablate(ablate_args);
    if (sweep->parsed()) return cmd_sweep(sweep_args, sweep_grid, sweep_seeds);
    if (theory->parsed())
      return cmd_theory(theory_out, theory_worlds, theory_mc, theory_traj, theory_grid,
                        theory_seed, theory_overwrite);
    if (gradcheck->parsed()) return cmd_gradcheck(grad_seeds, grad_eps, grad_tol);
    if (analyze->parsed())
      return cmd_analyze(analyze_a, analyze_b, analyze_out, analyze_overwrite);
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (!e.field_path.empty()) std::cerr << " at " << e.field_path;
    std::cerr << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitViolation;
  }
  return kExitUsage;
}

}  // namespace protoflow
