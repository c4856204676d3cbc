#include "protoflow/optim.hpp"

#include <cmath>

#include "protoflow/errors.hpp"

namespace protoflow {

double clip_global_norm(const std::vector<TensorRef>& grads, double clip_norm) {
  double sq = 0.0;
  for (const TensorRef& g : grads)
    for (std::size_t i = 0; i < g.size; ++i) {
      if (!std::isfinite(g.data[i])) throw NumericError("non-finite gradient");
      sq += g.data[i] * g.data[i];
    }
  const double norm = std::sqrt(sq);
  if (clip_norm <= 0.0) return norm;
  // Tolerance makes clipping idempotent despite rounding of the first rescale.
  if (norm <= clip_norm * (1.0 + 1e-12)) return norm;
  const double s = clip_norm / norm;
  for (const TensorRef& g : grads)
    for (std::size_t i = 0; i < g.size; ++i) g.data[i] *= s;
  return norm;
}

void sgd_step(const std::vector<TensorRef>& params,
              const std::vector<TensorRef>& grads, SgdState& state,
              const SgdOptions& opt) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: tensor count mismatch");
  if (opt.lr <= 0.0) throw ArgumentError("sgd_step: lr must be positive");

  if (state.momentum.empty()) {
    state.momentum.reserve(params.size());
    for (const TensorRef& p : params) state.momentum.emplace_back(p.size, 0.0);
  }
  if (state.momentum.size() != params.size())
    throw ShapeError("sgd_step: state does not match parameter list");

  clip_global_norm(grads, opt.clip_norm);

  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].size != grads[t].size || state.momentum[t].size() != params[t].size)
      throw ShapeError("sgd_step: tensor shape mismatch");
    double* p = params[t].data;
    const double* g = grads[t].data;
    double* v = state.momentum[t].data();
    for (std::size_t i = 0; i < params[t].size; ++i) {
      v[i] = opt.momentum * v[i] + (g[i] + opt.weight_decay * p[i]);
      p[i] -= opt.lr * v[i];
    }
  }
  ++state.step;
}

Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double eps) {
  if (eps <= 0.0) throw ArgumentError("finite_diff_grad: eps must be positive");
  Vec g(x.size());
  Vec probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double fp = f(probe);
    probe[i] = x[i] - eps;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: non-finite function value");
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

double poly_lr(int i, int i_max, double eta0, int warmup, double warmup_start,
               double power) {
  const double frac = 1.0 - static_cast<double>(i) / static_cast<double>(i_max);
  const double poly = eta0 * std::pow(std::max(0.0, frac), power);
  if (warmup > 0 && i < warmup) {
    const double frac_w =
        1.0 - static_cast<double>(warmup) / static_cast<double>(i_max);
    const double target = eta0 * std::pow(std::max(0.0, frac_w), power);
    return warmup_start +
           (target - warmup_start) * static_cast<double>(i) / warmup;
  }
  return poly;
}

}  // namespace protoflow
