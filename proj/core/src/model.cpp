#include "protoflow/model.hpp"

#include "protoflow/errors.hpp"

namespace protoflow {

Encoder make_encoder(int raw_dim, int hidden, int feat_dim, Rng& rng) {
  if (feat_dim < 2) throw ArgumentError("make_encoder: feature dim must be >= 2");
  Encoder e;
  e.params = make_mlp2_kaiming(raw_dim, hidden, feat_dim, rng);
  return e;
}

Vec encode(const Encoder& enc, const Vec& x, Mlp2Cache* cache) {
  return mlp2_forward(enc.params, x, cache);
}

Vec encode_backward(const Encoder& enc, const Mlp2Cache& cache,
                    const Vec& grad_feature, Mlp2Params& grad) {
  return mlp2_backward(enc.params, cache, grad_feature, grad);
}

std::optional<std::size_t> Head::row_of(int class_id) const {
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].class_id == class_id) return r;
  return std::nullopt;
}

Vec logits(const Head& head, const Vec& feature) {
  if (head.rows.empty()) throw StateError("logits: empty head");
  Vec out(head.rows.size());
  for (std::size_t r = 0; r < head.rows.size(); ++r) {
    if (head.rows[r].w.size() != feature.size())
      throw ShapeError("logits: feature dim mismatch");
    out[r] = dot(head.rows[r].w, feature) + head.rows[r].b;
  }
  return out;
}

Vec logits_backward(const Head& head, const Vec& feature, const Vec& grad_logits,
                    Head& grad_head) {
  if (grad_logits.size() != head.rows.size() || grad_head.rows.size() != head.rows.size())
    throw ShapeError("logits_backward: row count mismatch");
  Vec grad_feature(feature.size(), 0.0);
  for (std::size_t r = 0; r < head.rows.size(); ++r) {
    const double g = grad_logits[r];
    if (g == 0.0) continue;
    axpy(g, feature, grad_head.rows[r].w);
    grad_head.rows[r].b += g;
    axpy(g, head.rows[r].w, grad_feature);
  }
  return grad_feature;
}

Head make_grad_head(const Head& head) {
  Head g;
  g.rows.reserve(head.rows.size());
  for (const HeadRow& r : head.rows)
    g.rows.push_back({r.class_id, Vec(r.w.size(), 0.0), 0.0});
  return g;
}

void grow_head(Head& head, const std::vector<int>& new_classes, std::size_t feat_dim,
               double init_std, Rng& rng) {
  for (int c : new_classes)
    if (head.row_of(c)) throw ArgumentError("grow_head: class already present");
  if (!head.rows.empty() && head.rows.front().w.size() != feat_dim)
    throw ShapeError("grow_head: feature dim mismatch");
  const std::size_t dim = feat_dim;
  for (int c : new_classes) {
    HeadRow row;
    row.class_id = c;
    row.w = Vec(dim, 0.0);
    if (init_std > 0.0)
      for (double& v : row.w) v = init_std * rng.normal();
    row.b = 0.0;
    head.rows.push_back(std::move(row));
  }
}

Teacher freeze_teacher(const Encoder& enc, const Head& head) {
  return Teacher{enc, head};
}

}  // namespace protoflow
