#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "protoflow/vec.hpp"

namespace protoflow {

struct LossWeights {
  double lambda_dist = 1.0;
  double lambda_flow = 1.0;
  double lambda_curve = 0.5;
  double lambda_sep = 0.1;
  double margin = 0.5;
  double distill_temperature = 2.0;
};

// Unweighted components; total carries the weights.
struct LossBreakdown {
  double seg = 0.0;
  double dist = 0.0;
  double flow = 0.0;
  double curve = 0.0;
  double sep = 0.0;
  double total = 0.0;
};

// Mean negative log-softmax of the true row, stabilized by max subtraction.
// `label_rows` indexes into each logits vector.
double ce_loss(const std::vector<Vec>& logits, const std::vector<std::size_t>& label_rows,
               std::vector<Vec>* grad_logits = nullptr);

// Mean over samples of KL(softmax(teacher/T) || softmax(student/T)), both
// restricted to `old_rows` before the softmax. Gradient flows to the student
// only. Empty old set gives 0 (step 0).
double kl_distill(const std::vector<Vec>& teacher_logits,
                  const std::vector<Vec>& student_logits, double temperature,
                  const std::vector<std::size_t>& old_rows,
                  std::vector<Vec>* grad_student = nullptr);

// One contribution per class: |newest - 2 mid + oldest|^2 where only the
// newest prototype is differentiable.
struct CurvatureTriple {
  Vec oldest;
  Vec mid;
  Vec newest;
};

double curvature_loss(const std::vector<CurvatureTriple>& triples,
                      std::vector<Vec>* grad_newest = nullptr);

// Ordered-pair hinge: sum_{c != c'} [margin - |mu_c - mu_c'|]_+^2. Each
// unordered pair counts twice. Hinge subgradient at the kink is 0.
double separation_loss(const std::vector<Vec>& prototypes, double margin,
                       std::vector<Vec>* grads = nullptr);

// total = seg + ld*dist + lf*flow + lc*curve + ls*sep; throws NumericError
// naming the first non-finite component.
LossBreakdown total_loss(double seg, double dist, double flow, double curve,
                         double sep, const LossWeights& w);

}  // namespace protoflow
