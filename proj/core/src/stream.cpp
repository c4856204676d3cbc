#include "protoflow/stream.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "protoflow/errors.hpp"

namespace protoflow {

std::map<int, int> TaskSchedule::first_step() const {
  std::map<int, int> fs;
  for (int t = 0; t < num_steps(); ++t)
    for (int c : class_sets[t]) fs[c] = t;
  return fs;
}

std::vector<int> TaskSchedule::classes_up_to(int t) const {
  std::vector<int> cs;
  for (int s = 0; s <= t && s < num_steps(); ++s)
    cs.insert(cs.end(), class_sets[s].begin(), class_sets[s].end());
  std::sort(cs.begin(), cs.end());
  return cs;
}

void TaskSchedule::validate() const {
  if (raw_dim <= 0) throw ArgumentError("schedule: raw_dim must be positive");
  if (class_sets.empty()) throw ArgumentError("schedule: no steps");
  if (timestamps.size() != class_sets.size())
    throw ArgumentError("schedule: one timestamp per step required");
  std::set<int> seen;
  for (const auto& cs : class_sets) {
    if (cs.empty()) throw ArgumentError("schedule: empty class set");
    for (int c : cs)
      if (!seen.insert(c).second)
        throw ArgumentError("schedule: class sets must be disjoint");
  }
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    if (!std::isfinite(timestamps[t])) throw ArgumentError("schedule: non-finite timestamp");
    if (t > 0 && timestamps[t] <= timestamps[t - 1])
      throw ArgumentError("schedule: timestamps must be strictly increasing");
  }
  for (int c : seen) {
    auto it = drift.find(c);
    if (it == drift.end()) throw ArgumentError("schedule: class without drift spec");
    const DriftSpec& d = it->second;
    if (static_cast<int>(d.base_mean.size()) != raw_dim)
      throw ArgumentError("schedule: base_mean dim mismatch");
    if (d.kind == DriftKind::kLinear && static_cast<int>(d.drift_vector.size()) != raw_dim)
      throw ArgumentError("schedule: drift_vector dim mismatch");
    if (d.kind == DriftKind::kSinusoidal) {
      if (static_cast<int>(d.amplitude.size()) != raw_dim)
        throw ArgumentError("schedule: amplitude dim mismatch");
      if (!(d.period > 0.0)) throw ArgumentError("schedule: period must be positive");
    }
    if (d.kind == DriftKind::kPiecewise) {
      if (d.segment_offsets.size() != d.breakpoints.size() + 1)
        throw ArgumentError("schedule: piecewise needs breakpoints+1 offsets");
      for (const Vec& o : d.segment_offsets)
        if (static_cast<int>(o.size()) != raw_dim)
          throw ArgumentError("schedule: piecewise offset dim mismatch");
      if (!std::is_sorted(d.breakpoints.begin(), d.breakpoints.end()))
        throw ArgumentError("schedule: breakpoints must be ascending");
    }
  }
  if (noise_std < 0.0) throw ArgumentError("schedule: noise_std must be >= 0");
  if (rho_old < 0.0 || rho_old > 1.0) throw ArgumentError("schedule: rho_old in [0,1]");
}

Vec class_mean_at(const TaskSchedule& schedule, int cls, double tau) {
  auto it = schedule.drift.find(cls);
  if (it == schedule.drift.end()) throw LookupError("class_mean_at: unknown class");
  const DriftSpec& d = it->second;
  switch (d.kind) {
    case DriftKind::kStatic:
      return d.base_mean;
    case DriftKind::kLinear: {
      Vec m = d.base_mean;
      axpy(tau, d.drift_vector, m);
      return m;
    }
    case DriftKind::kSinusoidal: {
      Vec m = d.base_mean;
      axpy(std::sin(2.0 * M_PI * tau / d.period), d.amplitude, m);
      return m;
    }
    case DriftKind::kPiecewise: {
      std::size_t seg = 0;
      while (seg < d.breakpoints.size() && tau >= d.breakpoints[seg]) ++seg;
      return add(d.base_mean, d.segment_offsets[seg]);
    }
  }
  throw ArgumentError("class_mean_at: unhandled drift kind");
}

std::vector<Sample> sample_step(const TaskSchedule& schedule, int t, int n, Rng& rng) {
  if (n <= 0) throw ArgumentError("sample_step: n must be positive");
  if (t < 0 || t >= schedule.num_steps()) throw ArgumentError("sample_step: step out of range");

  const std::vector<int>& new_classes = schedule.class_sets[t];
  std::vector<int> old_classes;
  for (int s = 0; s < t; ++s)
    old_classes.insert(old_classes.end(), schedule.class_sets[s].begin(),
                       schedule.class_sets[s].end());
  std::sort(old_classes.begin(), old_classes.end());

  const double tau = schedule.timestamps[t];
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    int y;
    if (!old_classes.empty() && rng.uniform() < schedule.rho_old) {
      y = old_classes[rng.uniform_index(old_classes.size())];
    } else {
      y = new_classes[rng.uniform_index(new_classes.size())];
    }
    const Vec mean = class_mean_at(schedule, y, tau);
    Sample s;
    s.x.resize(mean.size());
    for (std::size_t d = 0; d < mean.size(); ++d)
      s.x[d] = mean[d] + schedule.noise_std * rng.normal();
    s.y = y;
    s.step = t;
    s.timestamp = tau;
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t MemoryBuffer::total() const {
  std::size_t n = 0;
  for (const auto& [cls, v] : store) n += v.size();
  return n;
}

std::vector<const Sample*> MemoryBuffer::flattened() const {
  std::vector<const Sample*> out;
  out.reserve(total());
  for (const auto& [cls, v] : store)
    for (const Sample& s : v) out.push_back(&s);
  return out;
}

namespace {

std::vector<std::size_t> herding_select(const std::vector<std::size_t>& idx,
                                        const std::vector<Vec>& features,
                                        std::size_t budget) {
  // Greedy: each round add the candidate whose inclusion moves the selected
  // mean closest to the full class mean.
  Vec target(features[idx[0]].size(), 0.0);
  for (std::size_t i : idx) axpy(1.0, features[i], target);
  target = scale(target, 1.0 / static_cast<double>(idx.size()));

  std::vector<std::size_t> chosen;
  std::vector<bool> used(idx.size(), false);
  Vec sum(target.size(), 0.0);
  while (chosen.size() < budget && chosen.size() < idx.size()) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    const double inv = 1.0 / static_cast<double>(chosen.size() + 1);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      if (used[k]) continue;
      double sq = 0.0;
      const Vec& f = features[idx[k]];
      for (std::size_t d = 0; d < f.size(); ++d) {
        const double diff = (sum[d] + f[d]) * inv - target[d];
        sq += diff * diff;
      }
      if (sq < best) {
        best = sq;
        best_k = k;
      }
    }
    used[best_k] = true;
    axpy(1.0, features[idx[best_k]], sum);
    chosen.push_back(idx[best_k]);
  }
  return chosen;
}

}  // namespace

void memory_update(MemoryBuffer& buffer, const std::vector<Sample>& candidates,
                   const std::vector<Vec>* features, Rng& rng) {
  if (buffer.strategy == MemoryStrategy::kHerding &&
      (features == nullptr || features->size() != candidates.size()))
    throw ArgumentError("memory_update: herding requires aligned features");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    by_class[candidates[i].y].push_back(i);

  for (const auto& [cls, idx] : by_class) {
    if (buffer.store.count(cls)) continue;  // exemplars fixed at introduction
    const std::size_t budget = static_cast<std::size_t>(buffer.budget_per_class);
    std::vector<std::size_t> chosen;
    if (idx.size() <= budget) {
      chosen = idx;
    } else if (buffer.strategy == MemoryStrategy::kRandom) {
      // Reservoir sampling over the class's candidates.
      chosen.assign(idx.begin(), idx.begin() + budget);
      for (std::size_t k = budget; k < idx.size(); ++k) {
        const std::size_t j = rng.uniform_index(k + 1);
        if (j < budget) chosen[j] = idx[k];
      }
    } else {
      chosen = herding_select(idx, *features, budget);
    }
    std::vector<Sample>& slot = buffer.store[cls];
    for (std::size_t i : chosen) slot.push_back(candidates[i]);
  }
}

std::size_t shuffle_fraction(std::vector<double>& values, double alpha, Rng& rng) {
  if (alpha < 0.0 || alpha > 1.0) throw ArgumentError("shuffle_fraction: alpha in [0,1]");
  const std::size_t n = values.size();
  const std::size_t k = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n)));
  if (k < 2) return k;  // permuting < 2 entries is the identity

  // Partial Fisher-Yates picks k distinct positions.
  std::vector<std::size_t> pos(n);
  for (std::size_t i = 0; i < n; ++i) pos[i] = i;
  for (std::size_t i = 0; i < k; ++i)
    std::swap(pos[i], pos[i + rng.uniform_index(n - i)]);
  pos.resize(k);

  std::vector<double> vals(k);
  for (std::size_t i = 0; i < k; ++i) vals[i] = values[pos[i]];
  for (std::size_t i = k; i > 1; --i)
    std::swap(vals[i - 1], vals[rng.uniform_index(i)]);
  for (std::size_t i = 0; i < k; ++i) values[pos[i]] = vals[i];
  return k;
}

std::size_t time_shuffle(std::vector<Sample>& samples, double alpha, Rng& rng) {
  std::vector<double> taus(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) taus[i] = samples[i].timestamp;
  const std::size_t k = shuffle_fraction(taus, alpha, rng);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].timestamp = taus[i];
  return k;
}

TaskSchedule permute_tasks(const TaskSchedule& schedule, const std::vector<int>& order) {
  const int t_max = schedule.horizon();
  if (static_cast<int>(order.size()) != t_max)
    throw ArgumentError("permute_tasks: order must cover steps 1..T");
  std::vector<bool> hit(t_max, false);
  for (int o : order) {
    if (o < 1 || o > t_max || hit[o - 1])
      throw ArgumentError("permute_tasks: not a permutation of 1..T");
    hit[o - 1] = true;
  }
  TaskSchedule out = schedule;
  for (int k = 1; k <= t_max; ++k)
    out.class_sets[k] = schedule.class_sets[order[k - 1]];
  return out;
}

}  // namespace protoflow
