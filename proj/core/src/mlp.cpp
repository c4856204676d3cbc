#include "protoflow/mlp.hpp"

#include <algorithm>

namespace protoflow {

Mlp2Params make_mlp2(std::size_t in, std::size_t hidden, std::size_t out) {
  Mlp2Params p;
  p.w1 = Matrix(hidden, in);
  p.b1 = Vec(hidden, 0.0);
  p.w2 = Matrix(out, hidden);
  p.b2 = Vec(out, 0.0);
  return p;
}

Mlp2Params make_mlp2_kaiming(std::size_t in, std::size_t hidden, std::size_t out,
                             Rng& rng) {
  Mlp2Params p = make_mlp2(in, hidden, out);
  const double s1 = std::sqrt(2.0 / static_cast<double>(in));
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
  for (double& w : p.w1.data) w = s1 * rng.normal();
  for (double& w : p.w2.data) w = s2 * rng.normal();
  return p;
}

Vec mlp2_forward(const Mlp2Params& p, const Vec& input, Mlp2Cache* cache) {
  if (input.size() != p.w1.cols) throw ShapeError("mlp2_forward: input dim mismatch");
  if (p.b1.size() != p.w1.rows || p.b2.size() != p.w2.rows ||
      p.w2.cols != p.w1.rows)
    throw ShapeError("mlp2_forward: inconsistent parameter shapes");

  Vec pre1 = matvec(p.w1, input);
  for (std::size_t i = 0; i < pre1.size(); ++i) pre1[i] += p.b1[i];
  Vec hidden(pre1.size());
  for (std::size_t i = 0; i < pre1.size(); ++i) hidden[i] = std::max(0.0, pre1[i]);
  Vec out = matvec(p.w2, hidden);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.b2[i];

  if (cache) {
    cache->input = input;
    cache->pre1 = std::move(pre1);
    cache->hidden = std::move(hidden);
  }
  return out;
}

Vec mlp2_backward(const Mlp2Params& p, const Mlp2Cache& cache,
                  const Vec& grad_output, Mlp2Params& grad) {
  if (grad_output.size() != p.w2.rows)
    throw ShapeError("mlp2_backward: grad_output dim mismatch");
  if (cache.input.size() != p.w1.cols || cache.pre1.size() != p.w1.rows)
    throw ShapeError("mlp2_backward: cache does not match params");
  check_same_shape(p, grad);

  // out = w2 h + b2
  outer_acc(grad.w2, 1.0, grad_output, cache.hidden);
  for (std::size_t i = 0; i < grad.b2.size(); ++i) grad.b2[i] += grad_output[i];

  Vec grad_hidden = matvec_t(p.w2, grad_output);
  // ReLU: subgradient 0 at the kink.
  for (std::size_t i = 0; i < grad_hidden.size(); ++i)
    if (cache.pre1[i] <= 0.0) grad_hidden[i] = 0.0;

  outer_acc(grad.w1, 1.0, grad_hidden, cache.input);
  for (std::size_t i = 0; i < grad.b1.size(); ++i) grad.b1[i] += grad_hidden[i];

  return matvec_t(p.w1, grad_hidden);
}

void check_same_shape(const Mlp2Params& a, const Mlp2Params& b) {
  if (a.w1.rows != b.w1.rows || a.w1.cols != b.w1.cols ||
      a.w2.rows != b.w2.rows || a.w2.cols != b.w2.cols ||
      a.b1.size() != b.b1.size() || a.b2.size() != b.b2.size())
    throw ShapeError("mlp2: parameter shape mismatch");
}

std::size_t mlp2_param_count(const Mlp2Params& p) {
  return p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size();
}

Vec mlp2_flatten(const Mlp2Params& p) {
  Vec flat;
  flat.reserve(mlp2_param_count(p));
  flat.insert(flat.end(), p.w1.data.begin(), p.w1.data.end());
  flat.insert(flat.end(), p.b1.begin(), p.b1.end());
  flat.insert(flat.end(), p.w2.data.begin(), p.w2.data.end());
  flat.insert(flat.end(), p.b2.begin(), p.b2.end());
  return flat;
}

void mlp2_unflatten(const Vec& flat, Mlp2Params& p) {
  if (flat.size() != mlp2_param_count(p))
    throw ShapeError("mlp2_unflatten: size mismatch");
  std::size_t off = 0;
  std::copy_n(flat.begin() + off, p.w1.size(), p.w1.data.begin());
  off += p.w1.size();
  std::copy_n(flat.begin() + off, p.b1.size(), p.b1.begin());
  off += p.b1.size();
  std::copy_n(flat.begin() + off, p.w2.size(), p.w2.data.begin());
  off += p.w2.size();
  std::copy_n(flat.begin() + off, p.b2.size(), p.b2.begin());
}

}  // namespace protoflow
