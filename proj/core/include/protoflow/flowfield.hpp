#pragma once

#include <optional>
#include <vector>

#include "protoflow/mlp.hpp"
#include "protoflow/vec.hpp"

namespace protoflow {

// Sinusoidal encoding of a scalar time value. Interleaved pairs
// [sin(w_j ttilde), cos(w_j ttilde)] with w_j = omega0 * omega_base^j.
struct TimeEncodingConfig {
  int d_tau = 16;  // must be even
  double omega0 = M_PI;
  double omega_base = 2.0;
  bool per_class = true;  // ttilde = (tau - tau_first) / (tau_last - tau_first)
};

// tau_first/tau_last frame the normalization window (the class's first
// appearance and the horizon in per-class mode; 0 and the horizon globally).
// A degenerate window (tau_last == tau_first) maps to ttilde = 0 and sets the
// flag instead of failing.
Vec encode_time(const TimeEncodingConfig& cfg, double tau, double tau_first,
                double tau_last, bool* degenerate = nullptr);

double normalized_time(const TimeEncodingConfig& cfg, double tau, double tau_first,
                       double tau_last, bool* degenerate = nullptr);

// Velocity field over prototypes: a two-layer ReLU MLP on [mu; e(tau)],
// or on mu alone when time conditioning is off.
struct FlowField {
  Mlp2Params params;
  TimeEncodingConfig time;
  bool use_time = true;
  int feat_dim = 0;

  std::size_t input_dim() const {
    return static_cast<std::size_t>(feat_dim) + (use_time ? time.d_tau : 0);
  }
};

FlowField make_flow_field(int feat_dim, int hidden, bool use_time,
                          const TimeEncodingConfig& cfg, Rng& rng);

// Forward pass; `time_enc` is ignored when time conditioning is off.
Vec predict_velocity(const FlowField& f, const Vec& mu, const Vec& time_enc,
                     Mlp2Cache* cache = nullptr);

// Gradients of <velocity, grad_velocity> w.r.t. the field parameters and mu.
Vec predict_velocity_backward(const FlowField& f, const Mlp2Cache& cache,
                              const Vec& grad_velocity, Mlp2Params& grad_params);

struct PredictedPrototype {
  int class_id = -1;
  int target_step = 0;
  Vec mu_hat;
};

// Forward Euler: mu_hat = mu + dtau * F(mu, tau).
PredictedPrototype euler_step(const FlowField& f, const Vec& mu, double tau,
                              double tau_first, double tau_last, double dtau,
                              Mlp2Cache* cache = nullptr);

// sum_c |pred_c - obs_c|^2 with optional gradients (2r and -2r).
double flow_loss(const std::vector<Vec>& predicted, const std::vector<Vec>& observed,
                 std::vector<Vec>* grad_predicted = nullptr,
                 std::vector<Vec>* grad_observed = nullptr);

}  // namespace protoflow
