#include "protoflow/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protoflow/errors.hpp"
#include "protoflow/parallel.hpp"

namespace protoflow {

GaussianWorld make_world(int dim, double sigma, std::vector<Vec> competitors,
                         std::vector<Vec> trajectory) {
  if (dim <= 0) throw ArgumentError("make_world: dim must be positive");
  if (!(sigma > 0.0)) throw ArgumentError("make_world: sigma must be positive");
  if (competitors.empty()) throw ArgumentError("make_world: need at least one competitor");
  if (trajectory.empty()) throw ArgumentError("make_world: empty trajectory");
  GaussianWorld w;
  w.dim = dim;
  w.sigma = sigma;
  w.num_classes = static_cast<int>(competitors.size()) + 1;
  w.competitors = std::move(competitors);
  w.trajectory = std::move(trajectory);
  for (const Vec& c : w.competitors)
    if (static_cast<int>(c.size()) != dim) throw ArgumentError("make_world: competitor dim mismatch");
  for (const Vec& m : w.trajectory)
    if (static_cast<int>(m.size()) != dim) throw ArgumentError("make_world: trajectory dim mismatch");
  // Uniform separation: the margin must never collapse.
  for (int t = 0; t <= w.horizon(); ++t)
    if (!(margin(w, t) > 0.0))
      throw ArgumentError("make_world: uniform separation violated (zero margin)");
  return w;
}

double margin(const GaussianWorld& world, int t) {
  if (t < 0 || t > world.horizon()) throw ArgumentError("margin: step out of range");
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& c : world.competitors)
    best = std::min(best, norm2(sub(world.trajectory[t], c)));
  return best;
}

double min_margin(const GaussianWorld& world) {
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t <= world.horizon(); ++t) best = std::min(best, margin(world, t));
  return best;
}

double g_margin_bound(double gamma, int num_classes, double sigma) {
  if (gamma < 0.0) throw ArgumentError("g_margin_bound: gamma must be >= 0");
  if (!(sigma > 0.0)) throw ArgumentError("g_margin_bound: sigma must be positive");
  if (num_classes < 2) throw ArgumentError("g_margin_bound: need K >= 2");
  return (num_classes - 1) * std::exp(-gamma * gamma / (8.0 * sigma * sigma));
}

double lipschitz_lg(double gamma_min, int num_classes, double sigma) {
  if (!(gamma_min > 0.0)) throw ArgumentError("lipschitz_lg: gamma_min must be positive");
  const double km1 = num_classes - 1;
  if (gamma_min <= 2.0 * sigma)
    return km1 * std::exp(-0.5) / (2.0 * sigma);
  return km1 * (gamma_min / (4.0 * sigma * sigma)) *
         std::exp(-gamma_min * gamma_min / (8.0 * sigma * sigma));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

McEstimate mc_risk(const GaussianWorld& world, int t, std::int64_t n, Rng& rng) {
  if (n < 1000) throw ArgumentError("mc_risk: n must be >= 1000");
  const Vec& mu = world.trajectory.at(t);
  std::int64_t errors = 0;
  Vec z(world.dim);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int d = 0; d < world.dim; ++d) z[d] = mu[d] + world.sigma * rng.normal();
    double own = 0.0;
    for (int d = 0; d < world.dim; ++d) {
      const double diff = z[d] - mu[d];
      own += diff * diff;
    }
    bool wrong = false;
    for (const Vec& c : world.competitors) {
      double dist = 0.0;
      for (int d = 0; d < world.dim; ++d) {
        const double diff = z[d] - c[d];
        dist += diff * diff;
      }
      if (dist < own) {
        wrong = true;
        break;
      }
    }
    if (wrong) ++errors;
  }
  McEstimate e;
  e.samples = n;
  e.p_hat = static_cast<double>(errors) / static_cast<double>(n);
  e.std_error = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(n));
  return e;
}

SlackReport check_margin_path(const GaussianWorld& world, double tol) {
  return check_margin_path(world.trajectory, world.competitors, tol);
}

SlackReport check_margin_path(const std::vector<Vec>& trajectory,
                              const std::vector<Vec>& competitors, double tol) {
  const int t_max = static_cast<int>(trajectory.size()) - 1;
  if (t_max < 1) throw ArgumentError("check_margin_path: trajectory too short");

  std::vector<double> gammas(t_max + 1);
  for (int t = 0; t <= t_max; ++t) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& c : competitors) best = std::min(best, norm2(sub(trajectory[t], c)));
    gammas[t] = best;
  }
  std::vector<double> vnorm(t_max + 1, 0.0);
  for (int t = 1; t <= t_max; ++t) vnorm[t] = norm2(sub(trajectory[t], trajectory[t - 1]));

  SlackReport r;
  r.min_slack = std::numeric_limits<double>::infinity();
  for (int s = 0; s < t_max; ++s) {
    double path = 0.0;
    for (int t = s + 1; t <= t_max; ++t) {
      path += vnorm[t];
      const double slack = path - std::abs(gammas[t] - gammas[s]);
      r.min_slack = std::min(r.min_slack, slack);
      ++r.checks;
    }
  }
  r.pass = r.min_slack >= -tol;
  return r;
}

SlackReport check_path_curvature(const TrajectoryGeometry& geom, double tol) {
  SlackReport r;
  r.min_slack = std::numeric_limits<double>::infinity();
  const double t_steps = static_cast<double>(geom.velocities.size());
  if (t_steps < 1.0 || !geom.curvature_energy) {
    r.pass = true;
    r.min_slack = 0.0;
    return r;
  }
  const double energy = *geom.curvature_energy;
  double v2 = 0.0;
  for (const Vec& v : geom.velocities) v2 += dot(v, v);

  const double bound_v2 = t_steps * (t_steps + 1.0) / 2.0 * energy;
  r.min_slack = std::min(r.min_slack, bound_v2 - v2);
  ++r.checks;

  const double bound_s = t_steps * std::sqrt((t_steps + 1.0) / 2.0) * std::sqrt(energy);
  r.min_slack = std::min(r.min_slack, bound_s - geom.path_length);
  ++r.checks;

  r.pass = r.min_slack >= -tol;
  return r;
}

namespace {

// Sequential escalation: when a 3-sigma check fails, continue sampling (4x,
// then 16x the original budget) and re-judge at the combined estimate.
McEstimate refine_estimate(const GaussianWorld& world, int t, McEstimate base,
                           std::int64_t n_base, Rng& rng, int stage) {
  const std::int64_t extra = n_base * (stage == 0 ? 3 : 12);
  McEstimate more = mc_risk(world, t, extra, rng);
  McEstimate combined;
  combined.samples = base.samples + more.samples;
  combined.p_hat = (base.p_hat * base.samples + more.p_hat * more.samples) /
                   static_cast<double>(combined.samples);
  combined.std_error =
      std::sqrt(combined.p_hat * (1.0 - combined.p_hat) / combined.samples);
  return combined;
}

}  // namespace

BoundReport check_forgetting_bound(const GaussianWorld& world, std::int64_t n_mc,
                                   Rng& rng) {
  BoundReport rep;
  const int t_max = world.horizon();

  rep.gamma_min = min_margin(world);
  rep.lipschitz = lipschitz_lg(rep.gamma_min, world.num_classes, world.sigma);

  const TrajectoryGeometry geom = geometry(world.trajectory);
  rep.path_length = geom.path_length;
  rep.curvature_energy = geom.curvature_energy.value_or(0.0);

  rep.risks.reserve(t_max + 1);
  for (int t = 0; t <= t_max; ++t) {
    McEstimate est = mc_risk(world, t, n_mc, rng);
    const double gamma_t = margin(world, t);
    double bound = g_margin_bound(gamma_t, world.num_classes, world.sigma);

    // Lemma 1: R_hat <= g(gamma) + 3 SE, escalating before declaring violation.
    for (int stage = 0; stage < 2 && est.p_hat > bound + 3.0 * est.std_error; ++stage) {
      est = refine_estimate(world, t, est, n_mc, rng, stage);
      ++rep.escalations;
    }
    if (est.p_hat > bound + 3.0 * est.std_error) ++rep.margin_bound_violations;

    // Two-class worlds admit the exact closed form Phi(-gamma / 2 sigma).
    if (world.num_classes == 2) {
      const double exact = normal_cdf(-gamma_t / (2.0 * world.sigma));
      auto zscore = [&](const McEstimate& e) {
        const double se = e.std_error > 0.0
                              ? e.std_error
                              : std::sqrt(std::max(exact * (1.0 - exact), 1e-12) /
                                          static_cast<double>(e.samples));
        return std::abs(e.p_hat - exact) / se;
      };
      for (int stage = 0; stage < 2 && zscore(est) > 3.0; ++stage) {
        est = refine_estimate(world, t, est, n_mc, rng, stage);
        ++rep.escalations;
      }
      rep.max_exactness_z = std::max(rep.max_exactness_z, zscore(est));
      if (zscore(est) > 3.0) rep.two_class_exact_pass = false;
    }

    rep.margins.push_back(gamma_t);
    rep.bound_g.push_back(bound);
    rep.risks.push_back(est);
  }

  // Empirical forgetting and regret from the MC risks.
  int t_star = 0;
  for (int t = 1; t <= t_max; ++t)
    if (rep.risks[t].p_hat < rep.risks[t_star].p_hat) t_star = t;
  rep.forgetting_hat = rep.risks[t_max].p_hat - rep.risks[t_star].p_hat;
  const double t_d = static_cast<double>(t_max);
  rep.forgetting_bound =
      rep.lipschitz * t_d * std::sqrt((t_d + 1.0) / 2.0) * std::sqrt(rep.curvature_energy);
  rep.forgetting_slack_se = std::sqrt(rep.risks[t_max].std_error * rep.risks[t_max].std_error +
                                      rep.risks[t_star].std_error * rep.risks[t_star].std_error);
  rep.forgetting_bound_pass =
      rep.forgetting_hat <= rep.forgetting_bound + 3.0 * rep.forgetting_slack_se;

  rep.regret_hat = 0.0;
  double reg_var = 0.0;
  for (int t = 0; t <= t_max; ++t) {
    rep.regret_hat += rep.risks[t].p_hat - rep.risks[t_star].p_hat;
    reg_var += rep.risks[t].std_error * rep.risks[t].std_error;
  }
  rep.regret_bound = (t_d + 1.0) * rep.forgetting_bound;
  rep.regret_slack_se =
      std::sqrt(reg_var) + (t_d + 1.0) * rep.risks[t_star].std_error;
  rep.regret_bound_pass = rep.regret_hat <= rep.regret_bound + 3.0 * rep.regret_slack_se;

  return rep;
}

GaussianWorld random_world(Rng& rng, const WorldGenOptions& opt) {
  const int dim = 2 + static_cast<int>(rng.uniform_index(opt.max_dim - 1));
  const int k = 2 + static_cast<int>(rng.uniform_index(opt.max_classes - 1));
  const int horizon = 2 + static_cast<int>(rng.uniform_index(opt.max_horizon - 1));
  const double sigma = rng.uniform(opt.sigma_lo, opt.sigma_hi);
  const bool adversarial = rng.uniform() < opt.adversarial_fraction;

  // Competitors on a shell far enough out that gamma_min >= sigma is easy to keep.
  const double shell = 6.0 * sigma;
  std::vector<Vec> competitors;
  for (int c = 0; c + 1 < k; ++c) {
    Vec p(dim);
    for (int d = 0; d < dim; ++d) p[d] = rng.normal();
    const double n = norm2(p);
    p = scale(p, shell * (0.8 + 0.4 * rng.uniform()) / std::max(n, 1e-9));
    competitors.push_back(std::move(p));
  }

  const auto margin_of = [&](const Vec& mu) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec& c : competitors) best = std::min(best, norm2(sub(mu, c)));
    return best;
  };

  Vec start(dim, 0.0);  // origin is >= 0.8*shell from every competitor
  std::vector<Vec> traj{start};

  if (adversarial) {
    // Straight drift toward the nearest competitor, stopping at the floor.
    std::size_t nearest = 0;
    for (std::size_t c = 1; c < competitors.size(); ++c)
      if (norm2(competitors[c]) < norm2(competitors[nearest])) nearest = c;
    const Vec dir = scale(competitors[nearest], 1.0 / norm2(competitors[nearest]));
    const double reach = norm2(competitors[nearest]) - 1.05 * sigma;
    const double step_len = reach / horizon;
    for (int t = 1; t <= horizon; ++t) {
      const Vec candidate = scale(dir, step_len * t);
      // Another competitor near the path could undercut the margin floor.
      if (margin_of(candidate) >= 1.02 * sigma)
        traj.push_back(candidate);
      else
        traj.push_back(traj.back());
    }
  } else {
    // Random walk, rejecting steps that would cross the margin floor.
    Vec cur = start;
    for (int t = 1; t <= horizon; ++t) {
      Vec nxt;
      for (int attempt = 0; attempt < 64; ++attempt) {
        Vec step(dim);
        for (int d = 0; d < dim; ++d) step[d] = rng.normal();
        const double len = rng.uniform(0.1 * sigma, 1.2 * sigma);
        step = scale(step, len / std::max(norm2(step), 1e-9));
        nxt = add(cur, step);
        if (margin_of(nxt) >= 1.05 * sigma) break;
        nxt.clear();
      }
      if (nxt.empty()) nxt = cur;  // stay put if boxed in
      traj.push_back(nxt);
      cur = traj.back();
    }
  }
  return make_world(dim, sigma, std::move(competitors), std::move(traj));
}

std::vector<Vec> random_trajectory(Rng& rng, int max_horizon, int max_dim) {
  const int dim = 1 + static_cast<int>(rng.uniform_index(max_dim));
  const int horizon = 1 + static_cast<int>(rng.uniform_index(max_horizon));
  std::vector<Vec> traj;
  Vec cur(dim);
  for (int d = 0; d < dim; ++d) cur[d] = 2.0 * rng.normal();
  traj.push_back(cur);
  for (int t = 1; t <= horizon; ++t) {
    Vec step(dim);
    for (int d = 0; d < dim; ++d) step[d] = rng.normal();
    cur = add(cur, scale(step, rng.uniform(0.0, 1.5)));
    traj.push_back(cur);
  }
  return traj;
}

TheorySuiteReport run_theory_suite(const TheorySuiteOptions& opt) {
  TheorySuiteReport rep;
  Rng master(opt.seed);
  rep.worst_trajectory_slack = std::numeric_limits<double>::infinity();

  // Lemma sweep: margin-path and path-curvature inequalities on random
  // trajectories with random competitor sets.
  for (int i = 0; i < opt.trajectory_sweep; ++i) {
    Rng rng = master.split(1000 + i);
    std::vector<Vec> traj = random_trajectory(rng, 10, 8);
    while (traj.size() < 2) traj = random_trajectory(rng, 10, 8);
    const int dim = static_cast<int>(traj[0].size());
    std::vector<Vec> competitors;
    const int k = 1 + static_cast<int>(rng.uniform_index(4));
    for (int c = 0; c < k; ++c) {
      Vec p(dim);
      for (int d = 0; d < dim; ++d) p[d] = 3.0 * rng.normal();
      competitors.push_back(std::move(p));
    }
    const SlackReport lem3 = check_margin_path(traj, competitors, opt.tol);
    if (!lem3.pass) ++rep.margin_path_violations;
    const SlackReport lem4 = check_path_curvature(geometry(traj), opt.tol);
    if (!lem4.pass) ++rep.path_curvature_violations;
    rep.worst_trajectory_slack = std::min({rep.worst_trajectory_slack, lem3.min_slack, lem4.min_slack});
  }

  // Lipschitz grid: |g(b) - g(a)| <= Lg |b - a| over a dense margin grid.
  if (opt.lipschitz_grid >= 2) {
    Rng rng = master.split(2000);
    const int k = 2 + static_cast<int>(rng.uniform_index(4));
    const double sigma = rng.uniform(0.5, 1.5);
    const double gamma_min = rng.uniform(0.3 * sigma, 3.0 * sigma);
    const double lg = lipschitz_lg(gamma_min, k, sigma);
    std::vector<double> grid(opt.lipschitz_grid);
    for (int i = 0; i < opt.lipschitz_grid; ++i)
      grid[i] = gamma_min + 10.0 * sigma * i / (opt.lipschitz_grid - 1);
    for (std::size_t a = 0; a < grid.size(); ++a)
      for (std::size_t b = a + 1; b < grid.size(); ++b) {
        const double lhs = std::abs(g_margin_bound(grid[b], k, sigma) -
                                    g_margin_bound(grid[a], k, sigma));
        if (lhs > lg * (grid[b] - grid[a]) + opt.tol) ++rep.lipschitz_violations;
      }
  }

  // World sweep: Lemma 1, Theorem 1, Corollary 1, two-class exactness.
  rep.world_reports.resize(opt.worlds);
  parallel_for(static_cast<std::size_t>(opt.worlds), opt.threads, [&](std::size_t i) {
    Rng rng = master.split(3000 + i);
    const GaussianWorld world = random_world(rng);
    rep.world_reports[i] = check_forgetting_bound(world, opt.mc_samples, rng);
  });
  for (int i = 0; i < opt.worlds; ++i) {
    const BoundReport& r = rep.world_reports[i];
    rep.margin_bound_violations += r.margin_bound_violations;
    if (!r.forgetting_bound_pass) ++rep.forgetting_bound_violations;
    if (!r.regret_bound_pass) ++rep.regret_bound_violations;
    if (!r.two_class_exact_pass) ++rep.exactness_violations;
    rep.escalations += r.escalations;
    rep.max_exactness_z = std::max(rep.max_exactness_z, r.max_exactness_z);
    if (r.max_exactness_z > 0.0) ++rep.two_class_worlds;
  }
  return rep;
}

}  // namespace protoflow
