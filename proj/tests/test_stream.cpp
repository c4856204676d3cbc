#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "protoflow/config.hpp"
#include "protoflow/errors.hpp"
#include "protoflow/stream.hpp"

using namespace protoflow;

namespace {

TaskSchedule two_step_schedule() {
  TaskSchedule s;
  s.raw_dim = 2;
  s.class_sets = {{0, 1}, {2}};
  s.timestamps = {0.0, 1.0};
  s.noise_std = 0.1;
  s.samples_per_step = 64;
  DriftSpec d;
  d.kind = DriftKind::kStatic;
  d.base_mean = {0.0, 0.0};
  s.drift[0] = d;
  d.base_mean = {3.0, 0.0};
  s.drift[1] = d;
  d.base_mean = {0.0, 3.0};
  s.drift[2] = d;
  return s;
}

}  // namespace

TEST_CASE("class_mean_at: static, linear, sinusoidal, piecewise") {
  TaskSchedule s = two_step_schedule();

  CHECK(class_mean_at(s, 1, 7.5) == Vec{3.0, 0.0});

  DriftSpec lin;
  lin.kind = DriftKind::kLinear;
  lin.base_mean = {0.0, 0.0};
  lin.drift_vector = {1.0, 0.0};
  s.drift[0] = lin;
  const Vec m = class_mean_at(s, 0, 2.0);
  CHECK(m[0] == doctest::Approx(2.0));
  CHECK(m[1] == doctest::Approx(0.0));

  DriftSpec sine;
  sine.kind = DriftKind::kSinusoidal;
  sine.base_mean = {1.0, -1.0};
  sine.amplitude = {0.5, 0.5};
  sine.period = 4.0;
  s.drift[2] = sine;
  const Vec zc = class_mean_at(s, 2, 2.0);  // tau = period/2, sine zero crossing
  CHECK(zc[0] == doctest::Approx(1.0));
  CHECK(zc[1] == doctest::Approx(-1.0));

  DriftSpec pw;
  pw.kind = DriftKind::kPiecewise;
  pw.base_mean = {0.0, 0.0};
  pw.breakpoints = {1.0, 2.0};
  pw.segment_offsets = {{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  s.drift[1] = pw;
  CHECK(class_mean_at(s, 1, 0.5)[0] == doctest::Approx(0.0));
  CHECK(class_mean_at(s, 1, 1.5)[0] == doctest::Approx(1.0));
  CHECK(class_mean_at(s, 1, 2.5)[0] == doctest::Approx(2.0));

  CHECK_THROWS_AS(class_mean_at(s, 42, 0.0), LookupError);
}

TEST_CASE("sample_step: zero noise pins samples to the drifted mean") {
  TaskSchedule s = two_step_schedule();
  s.noise_std = 0.0;
  Rng rng(1);
  for (const Sample& smp : sample_step(s, 0, 50, rng)) {
    const Vec m = class_mean_at(s, smp.y, 0.0);
    CHECK(smp.x == m);
  }
}

TEST_CASE("sample_step: strict protocol keeps old classes out of new steps") {
  TaskSchedule s = two_step_schedule();
  s.rho_old = 0.0;
  Rng rng(2);
  for (const Sample& smp : sample_step(s, 1, 200, rng)) CHECK(smp.y == 2);
}

TEST_CASE("sample_step: balanced labels at the base step") {
  TaskSchedule s = two_step_schedule();
  Rng rng(3);
  const int n = 10000;
  int count0 = 0;
  for (const Sample& smp : sample_step(s, 0, n, rng))
    if (smp.y == 0) ++count0;
  CHECK(std::abs(count0 - n / 2) < 3.0 * std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sample_step: argument errors") {
  TaskSchedule s = two_step_schedule();
  Rng rng(4);
  CHECK_THROWS_AS(sample_step(s, 0, 0, rng), ArgumentError);
  CHECK_THROWS_AS(sample_step(s, 5, 10, rng), ArgumentError);
}

TEST_CASE("schedule validation rejects overlapping class sets") {
  TaskSchedule s = two_step_schedule();
  s.class_sets = {{0, 1}, {1}};
  CHECK_THROWS_AS(s.validate(), ArgumentError);
}

TEST_CASE("label validity: every sample lies in the classes seen so far") {
  const RunConfig cfg = standard_benchmark_config();
  const TaskSchedule s = build_schedule(cfg.schedule);
  Rng rng(5);
  for (int t = 0; t < s.num_steps(); ++t) {
    const auto classes = s.classes_up_to(t);
    for (const Sample& smp : sample_step(s, t, 100, rng)) {
      CHECK(std::find(classes.begin(), classes.end(), smp.y) != classes.end());
      CHECK(smp.step == t);
    }
  }
}

TEST_CASE("memory_update: budget covers all candidates") {
  MemoryBuffer buf;
  buf.budget_per_class = 10;
  buf.strategy = MemoryStrategy::kRandom;
  std::vector<Sample> candidates;
  for (int i = 0; i < 6; ++i) candidates.push_back({{double(i)}, 0, 0, 0.0});
  Rng rng(6);
  memory_update(buf, candidates, nullptr, rng);
  CHECK(buf.store.at(0).size() == 6);
}

TEST_CASE("memory_update: herding with budget 1 picks the nearest-to-mean sample") {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(100 + trial);
    std::vector<Sample> candidates;
    std::vector<Vec> feats;
    const int n = 12;
    for (int i = 0; i < n; ++i) {
      candidates.push_back({{double(i)}, 7, 0, 0.0});
      feats.push_back({rng.normal(), rng.normal()});
    }
    Vec mean(2, 0.0);
    for (const Vec& f : feats) axpy(1.0 / n, f, mean);
    std::size_t best = 0;
    for (std::size_t i = 1; i < feats.size(); ++i)
      if (norm2(sub(feats[i], mean)) < norm2(sub(feats[best], mean))) best = i;

    MemoryBuffer buf;
    buf.budget_per_class = 1;
    buf.strategy = MemoryStrategy::kHerding;
    memory_update(buf, candidates, &feats, rng);
    REQUIRE(buf.store.at(7).size() == 1);
    CHECK(buf.store.at(7)[0].x == candidates[best].x);
  }
}

TEST_CASE("memory_update: random selection is deterministic for a fixed seed") {
  std::vector<Sample> candidates;
  for (int i = 0; i < 40; ++i) candidates.push_back({{double(i)}, 1, 0, 0.0});
  MemoryBuffer a, b;
  a.budget_per_class = b.budget_per_class = 5;
  a.strategy = b.strategy = MemoryStrategy::kRandom;
  Rng ra(17), rb(17);
  memory_update(a, candidates, nullptr, ra);
  memory_update(b, candidates, nullptr, rb);
  REQUIRE(a.store.at(1).size() == 5);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(a.store.at(1)[i].x == b.store.at(1)[i].x);
}

TEST_CASE("time_shuffle: alpha 0 is the identity") {
  TaskSchedule s = two_step_schedule();
  Rng rng(8);
  std::vector<Sample> samples = sample_step(s, 0, 100, rng);
  const std::vector<Sample> before = samples;
  CHECK(time_shuffle(samples, 0.0, rng) == 0);
  for (std::size_t i = 0; i < samples.size(); ++i)
    CHECK(samples[i].timestamp == before[i].timestamp);
}

TEST_CASE("time_shuffle: alpha 1 preserves the timestamp multiset") {
  std::vector<Sample> samples;
  for (int i = 0; i < 200; ++i) samples.push_back({{0.0}, 0, i % 4, double(i % 4)});
  std::multiset<double> before;
  for (const Sample& s : samples) before.insert(s.timestamp);
  Rng rng(9);
  CHECK(time_shuffle(samples, 1.0, rng) == 200);
  std::multiset<double> after;
  for (const Sample& s : samples) after.insert(s.timestamp);
  CHECK(before == after);
}

TEST_CASE("time_shuffle: floor(alpha n) entries are selected") {
  std::vector<Sample> samples(1000);
  for (int i = 0; i < 1000; ++i) samples[i].timestamp = i;
  Rng rng(10);
  CHECK(time_shuffle(samples, 0.5, rng) == 500);
}

TEST_CASE("permute_tasks: identity and swaps") {
  TaskSchedule s = two_step_schedule();
  s.class_sets = {{0}, {1}, {2}};
  s.timestamps = {0.0, 1.0, 2.0};
  DriftSpec d;
  d.kind = DriftKind::kStatic;
  d.base_mean = {0.0, 0.0};
  s.drift[0] = s.drift[1] = s.drift[2] = d;
  s.validate();

  const TaskSchedule same = permute_tasks(s, {1, 2});
  CHECK(same.class_sets == s.class_sets);
  CHECK(same.timestamps == s.timestamps);

  const TaskSchedule swapped = permute_tasks(s, {2, 1});
  CHECK(swapped.class_sets[1] == std::vector<int>{2});
  CHECK(swapped.class_sets[2] == std::vector<int>{1});
  CHECK(swapped.timestamps == s.timestamps);

  const auto fs = swapped.first_step();
  CHECK(fs.at(0) == 0);
  CHECK(fs.at(2) == 1);
  CHECK(fs.at(1) == 2);
  swapped.validate();

  CHECK_THROWS_AS(permute_tasks(s, {1, 1}), ArgumentError);
  CHECK_THROWS_AS(permute_tasks(s, {0, 1}), ArgumentError);
}

TEST_CASE("schedule disjointness holds for generated schedules") {
  const RunConfig cfg = standard_benchmark_config();
  const TaskSchedule s = build_schedule(cfg.schedule);
  std::set<int> seen;
  for (const auto& cs : s.class_sets)
    for (int c : cs) CHECK(seen.insert(c).second);
  CHECK(seen.size() == 6);
}
