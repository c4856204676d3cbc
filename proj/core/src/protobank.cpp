#include "protoflow/protobank.hpp"

#include <cmath>

#include "protoflow/errors.hpp"

namespace protoflow {

std::optional<Vec> batch_prototype(const std::vector<Vec>& features,
                                   const std::vector<int>& labels, int cls) {
  if (features.size() != labels.size())
    throw ShapeError("batch_prototype: features/labels size mismatch");
  Vec sum;
  std::size_t count = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (labels[i] != cls) continue;
    if (sum.empty()) sum.assign(features[i].size(), 0.0);
    axpy(1.0, features[i], sum);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return scale(sum, 1.0 / static_cast<double>(count));
}

void ema_update(PrototypeBank& bank, int cls, const Vec& batch_proto) {
  ema_update(bank, cls, batch_proto, bank.ema_alpha);
}

void ema_update(PrototypeBank& bank, int cls, const Vec& batch_proto, double alpha) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw ArgumentError("ema_update: alpha must be in (0, 1]");
  auto it = bank.prototypes.find(cls);
  if (it == bank.prototypes.end()) {
    bank.prototypes.emplace(cls, batch_proto);
    return;
  }
  Vec& mu = it->second;
  if (mu.size() != batch_proto.size())
    throw ShapeError("ema_update: prototype dim mismatch");
  for (std::size_t i = 0; i < mu.size(); ++i)
    mu[i] = (1.0 - alpha) * mu[i] + alpha * batch_proto[i];
}

Vec normalized(const Vec& v) {
  const double n = norm2(v);
  if (!(n > kNormEps)) throw DegenerateError("normalized: near-zero prototype norm");
  return scale(v, 1.0 / n);
}

Vec normalize_backward(const Vec& v_raw, const Vec& grad_normalized) {
  const double n = norm2(v_raw);
  if (!(n > kNormEps))
    throw DegenerateError("normalize_backward: near-zero prototype norm");
  const Vec u = scale(v_raw, 1.0 / n);
  const double proj = dot(u, grad_normalized);
  Vec g(v_raw.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = (grad_normalized[i] - proj * u[i]) / n;
  return g;
}

void snapshot(const PrototypeBank& bank, int step, double tau,
              TrajectoryMap& trajectories) {
  for (const auto& [cls, mu] : bank.prototypes) {
    PrototypeTrajectory& traj = trajectories[cls];
    if (traj.class_id < 0) {
      traj.class_id = cls;
      traj.first_step = step;
    }
    if (!traj.points.empty() && traj.points.back().step >= step)
      throw StateError("snapshot: duplicate or out-of-order step");
    traj.points.push_back({step, tau, mu});
  }
}

TrajectoryGeometry geometry(const PrototypeTrajectory& traj) {
  std::vector<Vec> pts;
  pts.reserve(traj.points.size());
  for (const TrajectoryPoint& p : traj.points) pts.push_back(p.mu);
  return geometry(pts);
}

TrajectoryGeometry geometry(const std::vector<Vec>& points) {
  TrajectoryGeometry g;
  const std::size_t n = points.size();
  if (n == 0) throw ArgumentError("geometry: empty trajectory");

  for (std::size_t t = 1; t < n; ++t) g.velocities.push_back(sub(points[t], points[t - 1]));
  for (std::size_t t = 1; t < g.velocities.size(); ++t) {
    Vec kappa = sub(g.velocities[t], g.velocities[t - 1]);
    g.curvature_mags.push_back(norm2(kappa));
    g.curvatures.push_back(std::move(kappa));
  }

  for (const Vec& v : g.velocities) g.path_length += norm2(v);

  if (!g.velocities.empty()) {
    double energy = dot(g.velocities[0], g.velocities[0]);
    for (const Vec& k : g.curvatures) energy += dot(k, k);
    g.curvature_energy = energy;
  }
  if (!g.curvature_mags.empty()) {
    double s = 0.0;
    for (double m : g.curvature_mags) s += m;
    g.mean_curvature = s / static_cast<double>(g.curvature_mags.size());
  }
  return g;
}

}  // namespace protoflow
