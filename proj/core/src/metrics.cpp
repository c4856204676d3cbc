#include "protoflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "protoflow/errors.hpp"

namespace protoflow {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (std::int64_t c : counts) n += c;
  return n;
}

std::vector<std::optional<double>> iou_from_confusion(const ConfusionMatrix& cm) {
  const int k = cm.num_classes;
  std::vector<std::optional<double>> iou(k);
  for (int c = 0; c < k; ++c) {
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::int64_t tp = cm.at(c, c);
    const std::int64_t denom = row + col - tp;
    if (denom > 0)
      iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
  }
  return iou;
}

double mean_defined(const std::vector<std::optional<double>>& values) {
  double s = 0.0;
  int n = 0;
  for (const auto& v : values)
    if (v) {
      s += *v;
      ++n;
    }
  return n > 0 ? s / n : 0.0;
}

OaF1 oa_f1(const ConfusionMatrix& cm) {
  OaF1 out;
  const int k = cm.num_classes;
  const std::int64_t total = cm.total();
  std::int64_t trace = 0;
  out.f1.resize(k, 0.0);
  for (int c = 0; c < k; ++c) {
    trace += cm.at(c, c);
    std::int64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const double tp = static_cast<double>(cm.at(c, c));
    const double prec = col > 0 ? tp / static_cast<double>(col) : 0.0;
    const double rec = row > 0 ? tp / static_cast<double>(row) : 0.0;
    out.f1[c] = (prec + rec) > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  out.oa = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
  double s = 0.0;
  for (double f : out.f1) s += f;
  out.mf1 = k > 0 ? s / k : 0.0;
  return out;
}

std::optional<double> forgetting_score(const PerStepClassValues& iou_history,
                                       const std::map<int, int>& first_step,
                                       bool include_final_group) {
  const int steps = static_cast<int>(iou_history.size());
  const int t_final = steps - 1;
  if (steps < 2) return std::nullopt;

  // Per-class completeness: every class must be present from t_c to T.
  for (const auto& [cls, tc] : first_step)
    for (int t = tc; t < steps; ++t)
      if (!iou_history[t].count(cls))
        throw ArgumentError("forgetting_score: incomplete history");

  const int last_group = include_final_group ? t_final : t_final - 1;
  double sum = 0.0;
  int groups = 0;
  for (int t = 1; t <= last_group; ++t) {
    std::vector<int> group;
    for (const auto& [cls, tc] : first_step)
      if (tc == t) group.push_back(cls);
    if (group.empty()) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (int s = t; s <= t_final; ++s) {
      double m = 0.0;
      for (int cls : group) m += iou_history[s].at(cls);
      best = std::max(best, m / group.size());
    }
    double final_m = 0.0;
    for (int cls : group) final_m += iou_history[t_final].at(cls);
    final_m /= group.size();
    sum += best - final_m;
    ++groups;
  }
  if (groups == 0) return std::nullopt;
  return sum / groups;
}

double per_class_forgetting(const std::vector<double>& history) {
  if (history.empty()) throw ArgumentError("per_class_forgetting: empty history");
  const double best = *std::max_element(history.begin(), history.end());
  return best - history.back();
}

double dynamic_regret(const std::vector<double>& risks) {
  if (risks.empty()) throw ArgumentError("dynamic_regret: empty risks");
  for (double r : risks)
    if (r < 0.0 || r > 1.0) throw ArgumentError("dynamic_regret: risks must be in [0,1]");
  const double best = *std::min_element(risks.begin(), risks.end());
  double reg = 0.0;
  for (double r : risks) reg += r - best;
  return reg;
}

std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw ShapeError("pearson: size mismatch");
  if (xs.size() < 2) throw ArgumentError("pearson: need at least two points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

AngleReport prototype_angles(const std::map<int, Vec>& normalized_prototypes) {
  AngleReport report;
  for (const auto& [cls, mu] : normalized_prototypes)
    if (std::abs(norm2(mu) - 1.0) > 1e-6)
      throw ArgumentError("prototype_angles: prototypes must be unit-norm");

  report.min_margin = std::numeric_limits<double>::infinity();
  double angle_sum = 0.0;
  for (auto a = normalized_prototypes.begin(); a != normalized_prototypes.end(); ++a) {
    auto b = a;
    for (++b; b != normalized_prototypes.end(); ++b) {
      const double cosv = std::clamp(dot(a->second, b->second), -1.0, 1.0);
      AnglePair p;
      p.class_a = a->first;
      p.class_b = b->first;
      p.angle_deg = std::acos(cosv) * 180.0 / M_PI;
      p.cos_margin = 1.0 - cosv;
      report.min_margin = std::min(report.min_margin, p.cos_margin);
      angle_sum += p.angle_deg;
      report.pairs.push_back(p);
    }
  }
  if (report.pairs.empty())
    report.min_margin = 0.0;
  else
    report.mean_angle_deg = angle_sum / report.pairs.size();
  return report;
}

DeltaReport delta_analysis(const std::vector<ClassSummary>& a,
                           const std::vector<ClassSummary>& b) {
  if (a.size() != b.size()) throw ArgumentError("delta_analysis: class count mismatch");
  DeltaReport report;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].class_id != b[i].class_id || a[i].first_step != b[i].first_step)
      throw ArgumentError("delta_analysis: mismatched class sets or schedules");
    DeltaEntry e;
    e.class_id = a[i].class_id;
    e.d_forgetting = a[i].forgetting - b[i].forgetting;
    e.d_final_iou = a[i].final_iou - b[i].final_iou;
    if (a[i].mean_curvature && b[i].mean_curvature) {
      e.d_curvature = *a[i].mean_curvature - *b[i].mean_curvature;
      ++report.defined_count;
      e.favorable = (*e.d_curvature < 0.0) && (e.d_forgetting < 0.0);
      if (e.favorable) ++report.favorable_count;
    }
    report.entries.push_back(e);
  }
  return report;
}

}  // namespace protoflow
