#include "protoflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "protoflow/errors.hpp"

namespace protoflow {

namespace {

// Softmax of selected rows, numerically stabilized.
Vec restricted_softmax(const Vec& logits, const std::vector<std::size_t>& rows,
                       double inv_temp) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t r : rows) mx = std::max(mx, logits[r] * inv_temp);
  Vec p(rows.size());
  double z = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p[i] = std::exp(logits[rows[i]] * inv_temp - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

}  // namespace

double ce_loss(const std::vector<Vec>& logits, const std::vector<std::size_t>& label_rows,
               std::vector<Vec>* grad_logits) {
  if (logits.empty()) throw ArgumentError("ce_loss: empty batch");
  if (logits.size() != label_rows.size())
    throw ShapeError("ce_loss: batch size mismatch");
  if (grad_logits) grad_logits->assign(logits.size(), Vec());

  const double inv_n = 1.0 / static_cast<double>(logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const Vec& l = logits[i];
    if (label_rows[i] >= l.size()) throw ArgumentError("ce_loss: label row out of range");
    const double mx = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (double v : l) z += std::exp(v - mx);
    const double logz = std::log(z) + mx;
    loss += (logz - l[label_rows[i]]) * inv_n;
    if (grad_logits) {
      Vec g(l.size());
      for (std::size_t r = 0; r < l.size(); ++r)
        g[r] = std::exp(l[r] - logz) * inv_n;
      g[label_rows[i]] -= inv_n;
      (*grad_logits)[i] = std::move(g);
    }
  }
  return loss;
}

double kl_distill(const std::vector<Vec>& teacher_logits,
                  const std::vector<Vec>& student_logits, double temperature,
                  const std::vector<std::size_t>& old_rows,
                  std::vector<Vec>* grad_student) {
  if (teacher_logits.size() != student_logits.size())
    throw ShapeError("kl_distill: batch size mismatch");
  if (temperature <= 0.0) throw ArgumentError("kl_distill: temperature must be positive");
  if (grad_student)
    grad_student->assign(student_logits.size(), Vec());
  if (old_rows.empty() || teacher_logits.empty()) {
    if (grad_student)
      for (std::size_t i = 0; i < student_logits.size(); ++i)
        (*grad_student)[i] = Vec(student_logits[i].size(), 0.0);
    return 0.0;
  }

  const double inv_t = 1.0 / temperature;
  const double inv_n = 1.0 / static_cast<double>(teacher_logits.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < teacher_logits.size(); ++i) {
    const Vec p = restricted_softmax(teacher_logits[i], old_rows, inv_t);
    const Vec q = restricted_softmax(student_logits[i], old_rows, inv_t);
    for (std::size_t k = 0; k < old_rows.size(); ++k)
      if (p[k] > 0.0) loss += p[k] * (std::log(p[k]) - std::log(q[k])) * inv_n;
    if (grad_student) {
      Vec g(student_logits[i].size(), 0.0);
      for (std::size_t k = 0; k < old_rows.size(); ++k)
        g[old_rows[k]] = (q[k] - p[k]) * inv_t * inv_n;
      (*grad_student)[i] = std::move(g);
    }
  }
  return loss;
}

double curvature_loss(const std::vector<CurvatureTriple>& triples,
                      std::vector<Vec>* grad_newest) {
  if (grad_newest) grad_newest->assign(triples.size(), Vec());
  double loss = 0.0;
  for (std::size_t c = 0; c < triples.size(); ++c) {
    const CurvatureTriple& t = triples[c];
    if (t.oldest.size() != t.mid.size() || t.mid.size() != t.newest.size())
      throw ShapeError("curvature_loss: prototype dim mismatch");
    Vec kappa(t.newest.size());
    for (std::size_t i = 0; i < kappa.size(); ++i)
      kappa[i] = t.newest[i] - 2.0 * t.mid[i] + t.oldest[i];
    loss += dot(kappa, kappa);
    if (grad_newest) (*grad_newest)[c] = scale(kappa, 2.0);
  }
  return loss;
}

double separation_loss(const std::vector<Vec>& prototypes, double margin,
                       std::vector<Vec>* grads) {
  if (grads) {
    grads->assign(prototypes.size(), Vec());
    for (std::size_t c = 0; c < prototypes.size(); ++c)
      (*grads)[c] = Vec(prototypes[c].size(), 0.0);
  }
  if (prototypes.size() < 2) return 0.0;

  double loss = 0.0;
  for (std::size_t a = 0; a < prototypes.size(); ++a) {
    for (std::size_t b = a + 1; b < prototypes.size(); ++b) {
      const Vec diff = sub(prototypes[a], prototypes[b]);
      const double d = norm2(diff);
      const double h = margin - d;
      if (h <= 0.0) continue;
      loss += 2.0 * h * h;  // ordered pairs: (a,b) and (b,a)
      if (grads && d > 0.0) {
        const double s = -4.0 * h / d;
        axpy(s, diff, (*grads)[a]);
        axpy(-s, diff, (*grads)[b]);
      }
      // d == 0: |.| is non-differentiable, subgradient 0.
    }
  }
  return loss;
}

LossBreakdown total_loss(double seg, double dist, double flow, double curve,
                         double sep, const LossWeights& w) {
  const std::array<std::pair<const char*, double>, 5> parts{
      {{"seg", seg}, {"dist", dist}, {"flow", flow}, {"curve", curve}, {"sep", sep}}};
  for (const auto& [name, v] : parts)
    if (!std::isfinite(v))
      throw NumericError(std::string("total_loss: non-finite component ") + name);
  LossBreakdown b;
  b.seg = seg;
  b.dist = dist;
  b.flow = flow;
  b.curve = curve;
  b.sep = sep;
  b.total = seg + w.lambda_dist * dist + w.lambda_flow * flow +
            w.lambda_curve * curve + w.lambda_sep * sep;
  return b;
}

}  // namespace protoflow
