#include <doctest.h>

#include <cmath>

#include "protoflow/errors.hpp"
#include "protoflow/theory.hpp"

using namespace protoflow;

TEST_CASE("margin: single and multiple competitors, Assumption 2 enforcement") {
  GaussianWorld w = make_world(2, 1.0, {{2.0, 0.0}}, {{0.0, 0.0}});
  CHECK(margin(w, 0) == doctest::Approx(2.0));

  GaussianWorld w2 = make_world(2, 1.0, {{1.5, 0.0}, {0.0, 3.0}}, {{0.0, 0.0}});
  CHECK(margin(w2, 0) == doctest::Approx(1.5));

  CHECK_THROWS_AS(make_world(2, 1.0, {{1.0, 0.0}}, {{1.0, 0.0}}), ArgumentError);
}

TEST_CASE("g_margin_bound: closed form and monotonicity") {
  CHECK(g_margin_bound(0.0, 4, 1.0) == doctest::Approx(3.0));
  CHECK(g_margin_bound(2.0, 3, 1.0) == doctest::Approx(2.0 * std::exp(-0.5)));
  CHECK(g_margin_bound(2.0, 3, 1.0) == doctest::Approx(1.21306).epsilon(1e-4));

  double prev = g_margin_bound(0.0, 3, 0.7);
  for (double gamma = 0.1; gamma < 5.0; gamma += 0.1) {
    const double cur = g_margin_bound(gamma, 3, 0.7);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("lipschitz_lg: both cases and continuity at the split") {
  CHECK(lipschitz_lg(1.0, 2, 1.0) == doctest::Approx(std::exp(-0.5) / 2.0));
  CHECK(lipschitz_lg(1.0, 2, 1.0) == doctest::Approx(0.30327).epsilon(1e-4));
  CHECK(lipschitz_lg(4.0, 2, 1.0) == doctest::Approx(std::exp(-2.0)));
  CHECK(lipschitz_lg(4.0, 2, 1.0) == doctest::Approx(0.13534).epsilon(1e-4));

  const double sigma = 0.8;
  const double below = lipschitz_lg(2.0 * sigma, 3, sigma);
  const double above = lipschitz_lg(2.0 * sigma + 1e-12, 3, sigma);
  CHECK(below == doctest::Approx(above).epsilon(1e-9));
}

TEST_CASE("normal_cdf: reference values") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(-1.0) == doctest::Approx(0.15865525393145707).epsilon(1e-12));
  CHECK(normal_cdf(1.0) + normal_cdf(-1.0) == doctest::Approx(1.0));
}

TEST_CASE("mc_risk: noiseless limit and the two-class closed form") {
  GaussianWorld tiny = make_world(2, 1e-9, {{1.0, 0.0}}, {{-1.0, 0.0}});
  Rng rng(71);
  const McEstimate silent = mc_risk(tiny, 0, 2000, rng);
  CHECK(silent.p_hat == 0.0);

  GaussianWorld w = make_world(2, 1.0, {{1.0, 0.0}}, {{-1.0, 0.0}});
  const McEstimate est = mc_risk(w, 0, 100000, rng);
  const double exact = normal_cdf(-1.0);  // margin 2, sigma 1
  CHECK(std::abs(est.p_hat - exact) <= 3.0 * est.std_error);
}

TEST_CASE("mc_risk stays below the Gaussian margin bound") {
  Rng rng(72);
  for (int trial = 0; trial < 10; ++trial) {
    Rng wrng = rng.split(trial);
    const GaussianWorld w = random_world(wrng);
    for (int t = 0; t <= w.horizon(); t += 2) {
      const McEstimate est = mc_risk(w, t, 20000, wrng);
      const double bound = g_margin_bound(margin(w, t), w.num_classes, w.sigma);
      CHECK(est.p_hat <= bound + 3.0 * est.std_error);
    }
  }
}

TEST_CASE("check_margin_path: static trajectory and tight straight drift") {
  GaussianWorld still = make_world(2, 1.0, {{3.0, 0.0}}, {{0.0, 0.0}, {0.0, 0.0}});
  const SlackReport r = check_margin_path(still);
  CHECK(r.pass);
  CHECK(r.min_slack == doctest::Approx(0.0));

  // Straight-line drift toward the single competitor: equality case.
  std::vector<Vec> traj;
  for (int t = 0; t <= 4; ++t) traj.push_back({0.5 * t, 0.0});
  const SlackReport tight = check_margin_path(traj, {{5.0, 0.0}});
  CHECK(tight.pass);
  CHECK(tight.min_slack == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("check_margin_path and check_path_curvature: randomized sweep") {
  Rng rng(73);
  int margin_path_viol = 0, path_curvature_viol = 0;
  for (int i = 0; i < 300; ++i) {
    Rng trng = rng.split(i);
    std::vector<Vec> traj = random_trajectory(trng, 10, 8);
    if (traj.size() < 2) continue;
    std::vector<Vec> competitors;
    for (int c = 0; c < 3; ++c) {
      Vec p(traj[0].size());
      for (double& v : p) v = 3.0 * trng.normal();
      competitors.push_back(p);
    }
    if (!check_margin_path(traj, competitors).pass) ++margin_path_viol;
    if (!check_path_curvature(geometry(traj)).pass) ++path_curvature_viol;
  }
  CHECK(margin_path_viol == 0);
  CHECK(path_curvature_viol == 0);
}

TEST_CASE("check_path_curvature: worked examples") {
  // Constant velocity |v|=1 over T=2 steps: sum|v|^2 = 2 <= 3 * K = 3.
  const TrajectoryGeometry line = geometry(std::vector<Vec>{{0.0}, {1.0}, {2.0}});
  const SlackReport r1 = check_path_curvature(line);
  CHECK(r1.pass);
  REQUIRE(line.curvature_energy);
  CHECK(*line.curvature_energy == doctest::Approx(1.0));

  // Corner trajectory: S = 2 <= 2 sqrt(1.5) sqrt(3) ~ 4.2426.
  const TrajectoryGeometry corner = geometry({{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}});
  CHECK(corner.path_length == doctest::Approx(2.0));
  CHECK(2.0 * std::sqrt(1.5) * std::sqrt(3.0) == doctest::Approx(4.2426).epsilon(1e-4));
  CHECK(check_path_curvature(corner).pass);

  const TrajectoryGeometry frozen = geometry({{1.0, 1.0}, {1.0, 1.0}});
  CHECK(check_path_curvature(frozen).pass);
}

TEST_CASE("check_forgetting_bound: static world and the regret identity") {
  std::vector<Vec> straight(5, Vec{0.0, 0.0});
  GaussianWorld w = make_world(2, 1.0, {{2.5, 0.0}}, straight);
  Rng rng(74);
  const BoundReport rep = check_forgetting_bound(w, 20000, rng);
  CHECK(rep.forgetting_bound_pass);
  CHECK(rep.regret_bound_pass);
  CHECK(rep.curvature_energy == doctest::Approx(0.0));

  // Regret is at most (T+1) times the max per-step excess, exactly.
  double best = 1.0, max_excess = 0.0;
  for (const McEstimate& e : rep.risks) best = std::min(best, e.p_hat);
  for (const McEstimate& e : rep.risks)
    max_excess = std::max(max_excess, e.p_hat - best);
  CHECK(rep.regret_hat <= (w.horizon() + 1) * max_excess + 1e-12);
}

TEST_CASE("check_forgetting_bound: small randomized world sweep") {
  Rng rng(75);
  for (int i = 0; i < 15; ++i) {
    Rng wrng = rng.split(100 + i);
    const GaussianWorld w = random_world(wrng);
    CHECK(min_margin(w) >= w.sigma);
    const BoundReport rep = check_forgetting_bound(w, 20000, wrng);
    CHECK(rep.margin_bound_violations == 0);
    CHECK(rep.forgetting_bound_pass);
    CHECK(rep.regret_bound_pass);
    CHECK(rep.two_class_exact_pass);
  }
}

TEST_CASE("run_theory_suite: reduced configuration passes") {
  TheorySuiteOptions opt;
  opt.trajectory_sweep = 100;
  opt.lipschitz_grid = 200;
  opt.worlds = 10;
  opt.mc_samples = 20000;
  const TheorySuiteReport rep = run_theory_suite(opt);
  CHECK(rep.pass());
  CHECK(rep.margin_path_violations == 0);
  CHECK(rep.path_curvature_violations == 0);
  CHECK(rep.lipschitz_violations == 0);
}
