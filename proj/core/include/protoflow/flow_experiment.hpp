#pragma once

#include <cstdint>
#include <vector>

#include "protoflow/flowfield.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/vec.hpp"

namespace protoflow {

// One observed prototype transition (mu, tau) -> mu_next with step dtau.
struct Transition {
  Vec mu;
  double tau = 0.0;
  double dtau = 0.0;
  Vec mu_next;
};

struct LinearFieldOptions {
  int dim = 4;
  int trajectories = 64;
  int steps = 8;             // transitions per trajectory
  double field_scale = 0.25; // spectral norm of A
  double drive_amplitude = 0.6;
};

// Transitions generated by the time-dependent field
// mu^{k+1} = mu^k + A mu^k + b(tau_k), b(tau) = amp * sin(2 pi tau + phase_d).
// tau_k runs over [0, 1] with uniform spacing.
std::vector<Transition> generate_linear_field_transitions(const LinearFieldOptions& opt,
                                                          Rng& rng);

struct FlowFitOptions {
  int hidden = 256;
  bool use_time = true;
  TimeEncodingConfig time_encoding;
  int iterations = 2000;
  int batch_size = 64;
  double lr = 0.05;
  double momentum = 0.9;
  double clip_norm = 1.0;
};

// Minimizes the one-step flow consistency loss over the transitions by SGD.
FlowField fit_flow_field(const std::vector<Transition>& train, const FlowFitOptions& opt,
                         Rng& rng);

// Mean squared one-step Euler prediction error over the transitions.
double one_step_mse(const FlowField& field, const std::vector<Transition>& transitions);

struct TimeSignalResult {
  double alpha = 0.0;
  double mse = 0.0;
};

// Trains one field per shuffle level alpha (timestamps of floor(alpha*n)
// training transitions permuted among themselves) and evaluates each on
// held-out transitions with true timestamps.
std::vector<TimeSignalResult> time_signal_experiment(const std::vector<double>& alphas,
                                                     const LinearFieldOptions& gen,
                                                     const FlowFitOptions& fit,
                                                     std::uint64_t seed);

}  // namespace protoflow
