#pragma once

#include <map>
#include <optional>
#include <vector>

#include "protoflow/vec.hpp"

namespace protoflow {

// Running per-class EMA prototype estimates. Stored values are detached:
// they carry no gradient, only the differentiable batch mean does.
struct PrototypeBank {
  double ema_alpha = 0.1;
  std::map<int, Vec> prototypes;
};

struct TrajectoryPoint {
  int step = 0;
  double tau = 0.0;
  Vec mu;
};

// Ordered end-of-step prototype snapshots for one class.
struct PrototypeTrajectory {
  int class_id = -1;
  int first_step = -1;
  std::vector<TrajectoryPoint> points;

  const TrajectoryPoint* at_step(int step) const {
    for (const TrajectoryPoint& p : points)
      if (p.step == step) return &p;
    return nullptr;
  }
};

using TrajectoryMap = std::map<int, PrototypeTrajectory>;

// Discrete geometry of one trajectory: first differences (velocities),
// second differences (curvature vectors), path length S, curvature energy
// K = |v1|^2 + sum |kappa|^2, and the mean curvature magnitude.
struct TrajectoryGeometry {
  std::vector<Vec> velocities;
  std::vector<Vec> curvatures;
  std::vector<double> curvature_mags;
  double path_length = 0.0;
  std::optional<double> curvature_energy;  // needs >= 2 points
  std::optional<double> mean_curvature;    // needs >= 3 points
};

// Differentiable mean feature of the samples of `cls` in the batch; the
// gradient distributes 1/N_c to each contributing feature. Returns nullopt
// when the class is absent from the batch.
std::optional<Vec> batch_prototype(const std::vector<Vec>& features,
                                   const std::vector<int>& labels, int cls);

// mu_c <- (1 - alpha) mu_c + alpha mu_batch; unregistered classes are
// registered with the batch value.
void ema_update(PrototypeBank& bank, int cls, const Vec& batch_proto);
void ema_update(PrototypeBank& bank, int cls, const Vec& batch_proto, double alpha);

constexpr double kNormEps = 1e-12;

// v / |v|; throws DegenerateError when |v| <= kNormEps.
Vec normalized(const Vec& v);

// Pullback of a gradient through normalized(): ((I - u u^T) / |v|) g.
Vec normalize_backward(const Vec& v_raw, const Vec& grad_normalized);

// Appends the current EMA value of every registered class to its trajectory.
// Exactly once per completed step; duplicate steps are a state error.
void snapshot(const PrototypeBank& bank, int step, double tau, TrajectoryMap& trajectories);

TrajectoryGeometry geometry(const PrototypeTrajectory& traj);
TrajectoryGeometry geometry(const std::vector<Vec>& points);

}  // namespace protoflow
