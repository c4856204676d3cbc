#include "protoflow/flow_experiment.hpp"

#include <cmath>

#include "protoflow/errors.hpp"
#include "protoflow/optim.hpp"
#include "protoflow/stream.hpp"

namespace protoflow {

std::vector<Transition> generate_linear_field_transitions(const LinearFieldOptions& opt,
                                                          Rng& rng) {
  const int d = opt.dim;
  Matrix a(d, d);
  for (double& v : a.data) v = rng.normal();
  // Crude spectral-norm estimate via a few power iterations, then rescale.
  Vec u(d);
  for (double& v : u) v = rng.normal();
  for (int it = 0; it < 20; ++it) {
    u = matvec_t(a, matvec(a, u));
    u = scale(u, 1.0 / std::max(norm2(u), 1e-12));
  }
  const double sn = std::sqrt(std::max(norm2(matvec(a, u)), 1e-12));
  for (double& v : a.data) v *= opt.field_scale / sn;

  Vec amp(d), phase(d);
  for (int i = 0; i < d; ++i) {
    amp[i] = opt.drive_amplitude * (0.5 + rng.uniform());
    phase[i] = 2.0 * M_PI * rng.uniform();
  }

  const double dtau = 1.0 / opt.steps;
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(opt.trajectories) * opt.steps);
  for (int traj = 0; traj < opt.trajectories; ++traj) {
    Vec mu(d);
    for (double& v : mu) v = rng.normal();
    for (int k = 0; k < opt.steps; ++k) {
      const double tau = static_cast<double>(k) * dtau;
      Vec next = add(mu, matvec(a, mu));
      for (int i = 0; i < d; ++i)
        next[i] += amp[i] * std::sin(2.0 * M_PI * tau + phase[i]);
      out.push_back({mu, tau, dtau, next});
      mu = std::move(next);
    }
  }
  return out;
}

FlowField fit_flow_field(const std::vector<Transition>& train, const FlowFitOptions& opt,
                         Rng& rng) {
  if (train.empty()) throw ArgumentError("fit_flow_field: no transitions");
  const int d = static_cast<int>(train.front().mu.size());
  FlowField field = make_flow_field(d, opt.hidden, opt.use_time, opt.time_encoding, rng);

  SgdState state;
  SgdOptions sgd{opt.lr, opt.momentum, 0.0, opt.clip_norm};
  for (int it = 0; it < opt.iterations; ++it) {
    Mlp2Params grad = make_mlp2(field.params.in_dim(), field.params.hidden_dim(),
                                field.params.out_dim());
    const double inv_b = 1.0 / opt.batch_size;
    for (int b = 0; b < opt.batch_size; ++b) {
      const Transition& tr = train[rng.uniform_index(train.size())];
      Mlp2Cache cache;
      Vec enc;
      if (field.use_time) enc = encode_time(field.time, tr.tau, 0.0, 1.0);
      const Vec v = predict_velocity(field, tr.mu, enc, &cache);
      Vec pred = tr.mu;
      axpy(tr.dtau, v, pred);
      Vec grad_v(v.size());
      for (std::size_t i = 0; i < v.size(); ++i)
        grad_v[i] = 2.0 * (pred[i] - tr.mu_next[i]) * tr.dtau * inv_b;
      predict_velocity_backward(field, cache, grad_v, grad);
    }
    SgdOptions step = sgd;
    step.lr = poly_lr(it, opt.iterations, opt.lr, opt.iterations / 20, opt.lr * 0.01);
    sgd_step({ref(field.params.w1), ref(field.params.b1), ref(field.params.w2),
              ref(field.params.b2)},
             {ref(grad.w1), ref(grad.b1), ref(grad.w2), ref(grad.b2)}, state, step);
  }
  return field;
}

double one_step_mse(const FlowField& field, const std::vector<Transition>& transitions) {
  if (transitions.empty()) throw ArgumentError("one_step_mse: no transitions");
  double total = 0.0;
  for (const Transition& tr : transitions) {
    Vec enc;
    if (field.use_time) enc = encode_time(field.time, tr.tau, 0.0, 1.0);
    const Vec v = predict_velocity(field, tr.mu, enc);
    Vec pred = tr.mu;
    axpy(tr.dtau, v, pred);
    const Vec r = sub(pred, tr.mu_next);
    total += dot(r, r);
  }
  return total / transitions.size();
}

std::vector<TimeSignalResult> time_signal_experiment(const std::vector<double>& alphas,
                                                     const LinearFieldOptions& gen,
                                                     const FlowFitOptions& fit,
                                                     std::uint64_t seed) {
  Rng master(seed);
  Rng rng_world = master.split(1);
  std::vector<Transition> all = generate_linear_field_transitions(gen, rng_world);

  // Deterministic 80/20 split into train and held-out.
  std::vector<Transition> train, heldout;
  Rng rng_split = master.split(2);
  for (const Transition& tr : all)
    (rng_split.uniform() < 0.8 ? train : heldout).push_back(tr);
  if (heldout.empty() || train.empty())
    throw StateError("time_signal_experiment: degenerate split");

  std::vector<TimeSignalResult> results;
  for (double alpha : alphas) {
    std::vector<Transition> shuffled = train;
    std::vector<double> taus(shuffled.size());
    for (std::size_t i = 0; i < shuffled.size(); ++i) taus[i] = shuffled[i].tau;
    Rng rng_shuffle = master.split(3);  // same selection across alphas
    shuffle_fraction(taus, alpha, rng_shuffle);
    for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].tau = taus[i];

    Rng rng_fit = master.split(4);  // identical init/batches across alphas
    const FlowField field = fit_flow_field(shuffled, fit, rng_fit);
    results.push_back({alpha, one_step_mse(field, heldout)});
  }
  return results;
}

}  // namespace protoflow
