#include "protoflow/flowfield.hpp"

#include <cmath>

#include "protoflow/errors.hpp"

namespace protoflow {

double normalized_time(const TimeEncodingConfig& cfg, double tau, double tau_first,
                       double tau_last, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (!cfg.per_class) {
    tau_first = 0.0;
  }
  const double span = tau_last - tau_first;
  if (span == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return (tau - tau_first) / span;
}

Vec encode_time(const TimeEncodingConfig& cfg, double tau, double tau_first,
                double tau_last, bool* degenerate) {
  if (cfg.d_tau <= 0 || cfg.d_tau % 2 != 0)
    throw ArgumentError("encode_time: d_tau must be a positive even count");
  const double t = normalized_time(cfg, tau, tau_first, tau_last, degenerate);
  Vec e(cfg.d_tau);
  double omega = cfg.omega0;
  for (int j = 0; 2 * j < cfg.d_tau; ++j) {
    e[2 * j] = std::sin(omega * t);
    e[2 * j + 1] = std::cos(omega * t);
    omega *= cfg.omega_base;
  }
  return e;
}

FlowField make_flow_field(int feat_dim, int hidden, bool use_time,
                          const TimeEncodingConfig& cfg, Rng& rng) {
  FlowField f;
  f.time = cfg;
  f.use_time = use_time;
  f.feat_dim = feat_dim;
  f.params = make_mlp2_kaiming(f.input_dim(), hidden, feat_dim, rng);
  return f;
}

static Vec flow_input(const FlowField& f, const Vec& mu, const Vec& time_enc) {
  if (static_cast<int>(mu.size()) != f.feat_dim)
    throw ShapeError("predict_velocity: prototype dim mismatch");
  if (!f.use_time) return mu;
  if (static_cast<int>(time_enc.size()) != f.time.d_tau)
    throw ShapeError("predict_velocity: time encoding dim mismatch");
  Vec in;
  in.reserve(f.input_dim());
  in.insert(in.end(), mu.begin(), mu.end());
  in.insert(in.end(), time_enc.begin(), time_enc.end());
  return in;
}

Vec predict_velocity(const FlowField& f, const Vec& mu, const Vec& time_enc,
                     Mlp2Cache* cache) {
  return mlp2_forward(f.params, flow_input(f, mu, time_enc), cache);
}

Vec predict_velocity_backward(const FlowField& f, const Mlp2Cache& cache,
                              const Vec& grad_velocity, Mlp2Params& grad_params) {
  Vec grad_in = mlp2_backward(f.params, cache, grad_velocity, grad_params);
  grad_in.resize(f.feat_dim);  // drop the time-encoding block
  return grad_in;
}

PredictedPrototype euler_step(const FlowField& f, const Vec& mu, double tau,
                              double tau_first, double tau_last, double dtau,
                              Mlp2Cache* cache) {
  if (!std::isfinite(dtau)) throw ArgumentError("euler_step: dtau must be finite");
  Vec enc;
  if (f.use_time) enc = encode_time(f.time, tau, tau_first, tau_last);
  const Vec v = predict_velocity(f, mu, enc, cache);
  PredictedPrototype p;
  p.mu_hat = mu;
  axpy(dtau, v, p.mu_hat);
  return p;
}

double flow_loss(const std::vector<Vec>& predicted, const std::vector<Vec>& observed,
                 std::vector<Vec>* grad_predicted, std::vector<Vec>* grad_observed) {
  if (predicted.size() != observed.size())
    throw ShapeError("flow_loss: class count mismatch");
  if (grad_predicted) grad_predicted->assign(predicted.size(), Vec());
  if (grad_observed) grad_observed->assign(predicted.size(), Vec());
  double loss = 0.0;
  for (std::size_t c = 0; c < predicted.size(); ++c) {
    const Vec r = sub(predicted[c], observed[c]);
    loss += dot(r, r);
    if (grad_predicted) (*grad_predicted)[c] = scale(r, 2.0);
    if (grad_observed) (*grad_observed)[c] = scale(r, -2.0);
  }
  return loss;
}

}  // namespace protoflow
