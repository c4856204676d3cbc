#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "protoflow/protobank.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/vec.hpp"

namespace protoflow {

// Stylized model: one drifting class trajectory, K-1 fixed competitor
// prototypes, shared isotropic noise sigma. Uniform separation (margin > 0
// at every step) is enforced at construction.
struct GaussianWorld {
  int dim = 0;
  int num_classes = 0;  // K, including the drifting class
  double sigma = 1.0;
  std::vector<Vec> competitors;  // K-1 fixed prototypes
  std::vector<Vec> trajectory;   // mu^(0..T) of the drifting class

  int horizon() const { return static_cast<int>(trajectory.size()) - 1; }
};

GaussianWorld make_world(int dim, double sigma, std::vector<Vec> competitors,
                         std::vector<Vec> trajectory);

// gamma^(t) = min_c' |mu^(t) - mu_c'|.
double margin(const GaussianWorld& world, int t);
double min_margin(const GaussianWorld& world);

// Gaussian margin bound g(gamma) = (K-1) exp(-gamma^2 / (8 sigma^2)).
double g_margin_bound(double gamma, int num_classes, double sigma);

// Lipschitz constant of g on [gamma_min, inf).
double lipschitz_lg(double gamma_min, int num_classes, double sigma);

// Standard normal CDF via erfc.
double normal_cdf(double x);

struct McEstimate {
  double p_hat = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
};

// Fraction of N(mu^(t), sigma^2 I) samples whose nearest prototype is a
// competitor; binomial standard error.
McEstimate mc_risk(const GaussianWorld& world, int t, std::int64_t n, Rng& rng);

struct SlackReport {
  double min_slack = 0.0;  // bound - quantity, over all checked instances
  int checks = 0;
  bool pass = false;
};

// Lemma "margin is Lipschitz in path length": |gamma^(t) - gamma^(s)| <=
// S(s,t) over all step pairs.
SlackReport check_margin_path(const GaussianWorld& world, double tol = 1e-9);
SlackReport check_margin_path(const std::vector<Vec>& trajectory,
                              const std::vector<Vec>& competitors, double tol = 1e-9);

// Discrete Sobolev bounds: sum |v|^2 <= T(T+1)/2 K and S <= T sqrt((T+1)/2) sqrt(K).
SlackReport check_path_curvature(const TrajectoryGeometry& geom, double tol = 1e-9);

struct BoundReport {
  std::vector<McEstimate> risks;      // per step
  std::vector<double> margins;        // per step
  std::vector<double> bound_g;        // g(gamma^(t)) per step
  double gamma_min = 0.0;
  double lipschitz = 0.0;
  double path_length = 0.0;
  double curvature_energy = 0.0;
  double forgetting_hat = 0.0;        // R^(T) - min_s R^(s)
  double forgetting_bound = 0.0;      // Lg T sqrt((T+1)/2) sqrt(K)
  double forgetting_slack_se = 0.0;
  double regret_hat = 0.0;
  double regret_bound = 0.0;          // (T+1) * forgetting bound
  double regret_slack_se = 0.0;
  int margin_bound_violations = 0;
  bool forgetting_bound_pass = false;
  bool regret_bound_pass = false;
  bool two_class_exact_pass = true;   // only meaningful when K == 2
  double max_exactness_z = 0.0;
  int escalations = 0;                // MC re-estimations triggered
};

// Runs the margin-bound, forgetting-bound and regret-bound checks on one
// world. Checks landing outside their 3-sigma slack are re-estimated at 4x
// and then 16x the sample count before being declared violations.
BoundReport check_forgetting_bound(const GaussianWorld& world, std::int64_t n_mc,
                                   Rng& rng);

struct WorldGenOptions {
  int max_classes = 5;
  int max_dim = 8;
  int max_horizon = 8;
  double sigma_lo = 0.5;
  double sigma_hi = 1.5;
  double adversarial_fraction = 0.25;  // straight drift toward the nearest competitor
};

// Random world with gamma_min >= sigma guaranteed.
GaussianWorld random_world(Rng& rng, const WorldGenOptions& opt = {});

// Random free trajectory (no margin constraint) for the inequality sweeps.
std::vector<Vec> random_trajectory(Rng& rng, int max_horizon = 10, int max_dim = 8);

struct TheorySuiteOptions {
  int trajectory_sweep = 1000;
  int lipschitz_grid = 1000;
  int worlds = 200;
  std::int64_t mc_samples = 100000;
  std::uint64_t seed = 7;
  double tol = 1e-9;
  int threads = 0;  // 0: PROTOFLOW_THREADS or hardware default
};

struct TheorySuiteReport {
  int margin_path_violations = 0;
  int path_curvature_violations = 0;
  int lipschitz_violations = 0;
  int margin_bound_violations = 0;
  int forgetting_bound_violations = 0;
  int regret_bound_violations = 0;
  int exactness_violations = 0;
  int two_class_worlds = 0;
  int escalations = 0;
  double worst_trajectory_slack = 0.0;
  double max_exactness_z = 0.0;
  std::vector<BoundReport> world_reports;

  bool pass() const {
    return margin_path_violations + path_curvature_violations + lipschitz_violations +
               margin_bound_violations + forgetting_bound_violations + regret_bound_violations +
               exactness_violations ==
           0;
  }
};

TheorySuiteReport run_theory_suite(const TheorySuiteOptions& opt);

}  // namespace protoflow
