#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "protoflow/mlp.hpp"
#include "protoflow/rng.hpp"
#include "protoflow/vec.hpp"

namespace protoflow {

// Raw-space -> feature-space encoder (two-layer perceptron).
struct Encoder {
  Mlp2Params params;

  std::size_t in_dim() const { return params.in_dim(); }
  std::size_t feat_dim() const { return params.out_dim(); }
};

Encoder make_encoder(int raw_dim, int hidden, int feat_dim, Rng& rng);

Vec encode(const Encoder& enc, const Vec& x, Mlp2Cache* cache = nullptr);

// Accumulates into grad, returns the input gradient.
Vec encode_backward(const Encoder& enc, const Mlp2Cache& cache,
                    const Vec& grad_feature, Mlp2Params& grad);

// Growing linear classifier: one row per class, ordered by introduction.
struct HeadRow {
  int class_id = -1;
  Vec w;
  double b = 0.0;
};

struct Head {
  std::vector<HeadRow> rows;

  std::size_t size() const { return rows.size(); }
  std::optional<std::size_t> row_of(int class_id) const;
};

// logit_r = w_r . feature + b_r over all rows, in row order.
Vec logits(const Head& head, const Vec& feature);

// Gradient of <logits, grad_logits> w.r.t. head rows (accumulated into
// grad_head, aligned with head.rows) and the feature (returned).
Vec logits_backward(const Head& head, const Vec& feature, const Vec& grad_logits,
                    Head& grad_head);

Head make_grad_head(const Head& head);

// Appends rows for new classes: zero-initialized, or N(0, init_std^2) values
// when init_std > 0. Existing rows are untouched.
void grow_head(Head& head, const std::vector<int>& new_classes, std::size_t feat_dim,
               double init_std, Rng& rng);

// Frozen copy of the model at the end of the previous step.
struct Teacher {
  Encoder encoder;
  Head head;
};

Teacher freeze_teacher(const Encoder& enc, const Head& head);

}  // namespace protoflow
