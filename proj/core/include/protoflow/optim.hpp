#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "protoflow/vec.hpp"

namespace protoflow {

// Mutable view of one parameter tensor's storage.
struct TensorRef {
  double* data = nullptr;
  std::size_t size = 0;
};

inline TensorRef ref(Vec& v) { return {v.data(), v.size()}; }
inline TensorRef ref(Matrix& m) { return {m.data.data(), m.data.size()}; }

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Momentum buffers, one per parameter tensor.
struct SgdState {
  std::vector<Vec> momentum;
  std::uint64_t step = 0;
};

// Scales all gradients so their global L2 norm is at most clip_norm.
// Returns the pre-clip norm. Re-clipping a clipped gradient is a no-op.
double clip_global_norm(const std::vector<TensorRef>& grads, double clip_norm);

// Coupled (classical) SGD with momentum: weight decay is added to the clipped
// gradient before the momentum accumulation, v <- m*v + (g + wd*p), p -= lr*v.
void sgd_step(const std::vector<TensorRef>& params,
              const std::vector<TensorRef>& grads, SgdState& state,
              const SgdOptions& opt);

// Central finite differences (f(x+eps e_i) - f(x-eps e_i)) / (2 eps).
Vec finite_diff_grad(const std::function<double(const Vec&)>& f, const Vec& x,
                     double eps);

// Learning rate: linear warmup onto the poly curve, then poly decay.
// i in [0, warmup): warmup_start + (poly(warmup) - warmup_start) * i / warmup
// i >= warmup:      eta0 * (1 - i / i_max)^power
double poly_lr(int i, int i_max, double eta0, int warmup,
               double warmup_start = 1e-4, double power = 0.9);

}  // namespace protoflow
