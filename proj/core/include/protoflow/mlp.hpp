#pragma once

#include "protoflow/rng.hpp"
#include "protoflow/vec.hpp"

namespace protoflow {

// Two-layer perceptron: out = w2 * relu(w1 * x + b1) + b2.
struct Mlp2Params {
  Matrix w1;  // hidden x in
  Vec b1;     // hidden
  Matrix w2;  // out x hidden
  Vec b2;     // out

  std::size_t in_dim() const { return w1.cols; }
  std::size_t hidden_dim() const { return w1.rows; }
  std::size_t out_dim() const { return w2.rows; }
};

// Pre-activations retained by the forward pass for the backward pass.
struct Mlp2Cache {
  Vec input;
  Vec pre1;    // w1 * x + b1
  Vec hidden;  // relu(pre1)
};

Mlp2Params make_mlp2(std::size_t in, std::size_t hidden, std::size_t out);

// Kaiming-normal weights (std = sqrt(2 / fan_in)), zero biases.
Mlp2Params make_mlp2_kaiming(std::size_t in, std::size_t hidden, std::size_t out,
                             Rng& rng);

Vec mlp2_forward(const Mlp2Params& p, const Vec& input, Mlp2Cache* cache = nullptr);

// Accumulates parameter gradients of <output, grad_output> into `grad` and
// returns the input gradient. ReLU subgradient at 0 is 0.
Vec mlp2_backward(const Mlp2Params& p, const Mlp2Cache& cache,
                  const Vec& grad_output, Mlp2Params& grad);

void check_same_shape(const Mlp2Params& a, const Mlp2Params& b);

// Flat views used by the optimizer and the finite-difference checker.
std::size_t mlp2_param_count(const Mlp2Params& p);
Vec mlp2_flatten(const Mlp2Params& p);
void mlp2_unflatten(const Vec& flat, Mlp2Params& p);

}  // namespace protoflow
