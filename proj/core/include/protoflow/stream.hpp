#pragma once

#include <map>
#include <string>
#include <vector>

#include "protoflow/rng.hpp"
#include "protoflow/vec.hpp"

namespace protoflow {

enum class DriftKind { kStatic, kLinear, kSinusoidal, kPiecewise };

// Raw-space class mean as a function of the timestamp tau.
struct DriftSpec {
  DriftKind kind = DriftKind::kStatic;
  Vec base_mean;
  Vec drift_vector;  // linear: mean = base + tau * drift
  Vec amplitude;     // sinusoidal: mean = base + amplitude * sin(2 pi tau / period)
  double period = 1.0;
  std::vector<double> breakpoints;  // piecewise: ascending tau boundaries
  std::vector<Vec> segment_offsets; // piecewise: breakpoints.size() + 1 offsets
};

// One "pixel": a raw-space point with its class, step and acquisition time.
struct Sample {
  Vec x;
  int y = -1;
  int step = 0;
  double timestamp = 0.0;
};

// The synthetic non-stationary class-incremental protocol.
struct TaskSchedule {
  int raw_dim = 0;
  std::vector<std::vector<int>> class_sets;  // new classes per step, disjoint
  std::vector<double> timestamps;            // tau_t per step
  std::map<int, DriftSpec> drift;            // per class
  double noise_std = 0.5;
  int samples_per_step = 512;
  double rho_old = 0.0;  // rate at which old classes appear in new-step data

  int num_steps() const { return static_cast<int>(class_sets.size()); }
  int horizon() const { return num_steps() - 1; }
  std::map<int, int> first_step() const;
  std::vector<int> classes_up_to(int t) const;
  std::vector<int> all_classes() const { return classes_up_to(horizon()); }

  // Throws on violated invariants (overlapping class sets, dim mismatches,
  // non-finite or non-increasing timestamps, bad drift specs).
  void validate() const;
};

Vec class_mean_at(const TaskSchedule& schedule, int cls, double tau);

// n samples for step t: labels uniform over C^t, except that with probability
// rho_old a label is drawn uniformly from C^{<t}; x ~ N(class_mean_at, noise^2 I).
std::vector<Sample> sample_step(const TaskSchedule& schedule, int t, int n, Rng& rng);

enum class MemoryStrategy { kRandom, kHerding };

struct MemoryBuffer {
  int budget_per_class = 20;
  MemoryStrategy strategy = MemoryStrategy::kHerding;
  std::map<int, std::vector<Sample>> store;

  std::size_t total() const;
  std::vector<const Sample*> flattened() const;
};

// Adds candidates for classes not yet in the buffer. Random strategy reservoir-
// samples to the budget; herding greedily minimizes the distance between the
// selected-set feature mean and the full class feature mean. `features` must
// align with `candidates` when herding.
void memory_update(MemoryBuffer& buffer, const std::vector<Sample>& candidates,
                   const std::vector<Vec>* features, Rng& rng);

// Permutes a fraction alpha of the entries among themselves (floor(alpha*n)
// entries selected uniformly). The value multiset is preserved. Returns the
// number of selected entries.
std::size_t shuffle_fraction(std::vector<double>& values, double alpha, Rng& rng);

// Same, applied to the timestamps of a materialized sample stream.
std::size_t time_shuffle(std::vector<Sample>& samples, double alpha, Rng& rng);

// Reorders steps 1..T by `order` (a permutation of 1..T, base step fixed);
// class sets and their drift specs move together, timestamps keep the
// canonical increasing sequence.
TaskSchedule permute_tasks(const TaskSchedule& schedule, const std::vector<int>& order);

}  // namespace protoflow
