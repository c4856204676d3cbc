#include <doctest.h>

#include <cmath>

#include "protoflow/errors.hpp"
#include "protoflow/mlp.hpp"
#include "protoflow/optim.hpp"
#include "protoflow/rng.hpp"

using namespace protoflow;

TEST_CASE("mlp2_forward: zero map") {
  Mlp2Params p = make_mlp2(3, 4, 2);
  const Vec out = mlp2_forward(p, {1.0, -2.0, 0.5});
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("mlp2_forward: identity passthrough on nonnegative input") {
  Mlp2Params p = make_mlp2(3, 3, 3);
  for (int i = 0; i < 3; ++i) {
    p.w1(i, i) = 1.0;
    p.w2(i, i) = 1.0;
  }
  const Vec x{0.0, 1.5, 2.0};
  const Vec out = mlp2_forward(p, x);
  for (int i = 0; i < 3; ++i) CHECK(out[i] == doctest::Approx(x[i]));
}

TEST_CASE("mlp2_forward: hand-evaluated two-layer example") {
  Mlp2Params p = make_mlp2(2, 1, 1);
  p.w1(0, 0) = 1.0;
  p.w1(0, 1) = -1.0;
  p.w2(0, 0) = 2.0;
  p.b2[0] = 1.0;
  Mlp2Cache cache;
  const Vec out = mlp2_forward(p, {3.0, 1.0}, &cache);
  CHECK(cache.pre1[0] == doctest::Approx(2.0));
  CHECK(out[0] == doctest::Approx(5.0));
}

TEST_CASE("mlp2_forward: dimension mismatch throws") {
  Mlp2Params p = make_mlp2(3, 4, 2);
  CHECK_THROWS_AS(mlp2_forward(p, {1.0, 2.0}), ShapeError);
}

TEST_CASE("mlp2_backward: zero grad_output gives zero gradients") {
  Rng rng(3);
  Mlp2Params p = make_mlp2_kaiming(3, 4, 2, rng);
  Mlp2Cache cache;
  mlp2_forward(p, {0.3, -0.2, 0.9}, &cache);
  Mlp2Params grad = make_mlp2(3, 4, 2);
  const Vec gin = mlp2_backward(p, cache, {0.0, 0.0}, grad);
  for (double v : gin) CHECK(v == 0.0);
  for (double v : mlp2_flatten(grad)) CHECK(v == 0.0);
}

TEST_CASE("mlp2_backward: pure linear chain rule when all units active") {
  Rng rng(4);
  Mlp2Params p = make_mlp2_kaiming(3, 4, 2, rng);
  p.b1 = Vec(4, 50.0);  // keeps every pre-activation positive
  const Vec x{0.1, -0.2, 0.3};
  Mlp2Cache cache;
  mlp2_forward(p, x, &cache);
  for (double v : cache.pre1) REQUIRE(v > 0.0);

  const Vec gout{0.7, -1.3};
  Mlp2Params grad = make_mlp2(3, 4, 2);
  const Vec gin = mlp2_backward(p, cache, gout, grad);
  const Vec expected = matvec_t(p.w1, matvec_t(p.w2, gout));
  for (int i = 0; i < 3; ++i) CHECK(gin[i] == doctest::Approx(expected[i]));
}

TEST_CASE("mlp2_backward matches central finite differences") {
  Rng rng(7);
  Mlp2Params p = make_mlp2_kaiming(3, 4, 2, rng);
  const Vec x{0.4, -1.1, 0.8};
  const Vec gout{1.0, 0.5};
  Mlp2Cache cache;
  mlp2_forward(p, x, &cache);
  Mlp2Params grad = make_mlp2(3, 4, 2);
  mlp2_backward(p, cache, gout, grad);

  Mlp2Params probe = p;
  auto f = [&](const Vec& flat) {
    mlp2_unflatten(flat, probe);
    return dot(mlp2_forward(probe, x), gout);
  };
  const Vec fd = finite_diff_grad(f, mlp2_flatten(p), 1e-5);
  const Vec an = mlp2_flatten(grad);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double scale = std::max({std::abs(fd[i]), std::abs(an[i]), 1e-8});
    CHECK(std::abs(fd[i] - an[i]) / scale < 1e-6);
  }
}

TEST_CASE("gradient exactness across 20 random seeds (d <= 8)") {
  for (int seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const int in = 2 + static_cast<int>(rng.uniform_index(7));
    const int hid = 2 + static_cast<int>(rng.uniform_index(7));
    const int out = 2 + static_cast<int>(rng.uniform_index(7));
    Mlp2Params p = make_mlp2_kaiming(in, hid, out, rng);
    Vec x(in), gout(out);
    for (double& v : x) v = rng.normal();
    for (double& v : gout) v = rng.normal();
    Mlp2Cache cache;
    mlp2_forward(p, x, &cache);
    Mlp2Params grad = make_mlp2(in, hid, out);
    mlp2_backward(p, cache, gout, grad);

    Mlp2Params probe = p;
    auto f = [&](const Vec& flat) {
      mlp2_unflatten(flat, probe);
      return dot(mlp2_forward(probe, x), gout);
    };
    const Vec fd = finite_diff_grad(f, mlp2_flatten(p), 1e-5);
    const Vec an = mlp2_flatten(grad);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      if (std::abs(fd[i]) <= 1e-8 && std::abs(an[i]) <= 1e-8) continue;
      const double scale = std::max(std::abs(fd[i]), std::abs(an[i]));
      CHECK(std::abs(fd[i] - an[i]) / scale < 1e-5);
    }
  }
}

TEST_CASE("finite_diff_grad: norm-squared, constant and product") {
  auto norm_sq = [](const Vec& v) { return dot(v, v); };
  Vec g = finite_diff_grad(norm_sq, {1.0, 2.0}, 1e-5);
  CHECK(g[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(g[1] == doctest::Approx(4.0).epsilon(1e-6));

  auto constant = [](const Vec&) { return 42.0; };
  g = finite_diff_grad(constant, {3.0, -1.0, 2.0}, 1e-5);
  for (double v : g) CHECK(v == doctest::Approx(0.0));

  auto prod = [](const Vec& v) { return v[0] * v[1]; };
  g = finite_diff_grad(prod, {3.0, 5.0}, 1e-5);
  CHECK(g[0] == doctest::Approx(5.0).epsilon(1e-8));
  CHECK(g[1] == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("sgd_step: zero gradient with zero weight decay is a no-op") {
  Vec p{0.5, -0.25};
  Vec g{0.0, 0.0};
  SgdState state;
  sgd_step({ref(p)}, {ref(g)}, state, {0.1, 0.9, 0.0, 1.0});
  CHECK(p[0] == 0.5);
  CHECK(p[1] == -0.25);
}

TEST_CASE("sgd_step: plain step without momentum") {
  Vec p{0.0, 0.0};
  Vec g{1.0, 0.0};
  SgdState state;
  sgd_step({ref(p)}, {ref(g)}, state, {0.1, 0.0, 0.0, 0.0});
  CHECK(p[0] == doctest::Approx(-0.1));
  CHECK(p[1] == 0.0);
}

TEST_CASE("sgd_step: global norm clipping scales the gradient") {
  Vec p{0.0, 0.0};
  Vec g{6.0, 8.0};  // norm 10
  SgdState state;
  sgd_step({ref(p)}, {ref(g)}, state, {1.0, 0.0, 0.0, 1.0});
  CHECK(p[0] == doctest::Approx(-0.6));
  CHECK(p[1] == doctest::Approx(-0.8));
}

TEST_CASE("clip_global_norm is idempotent") {
  Vec g{6.0, 8.0, -3.0, 2.5};
  clip_global_norm({ref(g)}, 1.0);
  const Vec once = g;
  clip_global_norm({ref(g)}, 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == once[i]);
}

TEST_CASE("sgd_step: non-finite gradient aborts") {
  Vec p{0.0};
  Vec g{std::numeric_limits<double>::quiet_NaN()};
  SgdState state;
  CHECK_THROWS_AS(sgd_step({ref(p)}, {ref(g)}, state, {0.1, 0.9, 0.0, 1.0}),
                  NumericError);
}

TEST_CASE("sample_normal: zero stddev returns the mean") {
  Rng rng(11);
  const auto samples = sample_normal(rng, {1.0, -2.0}, 0.0, 5);
  for (const Vec& s : samples) {
    CHECK(s[0] == 1.0);
    CHECK(s[1] == -2.0);
  }
}

TEST_CASE("sample_normal: law-of-large-numbers concentration") {
  Rng rng(12);
  const auto samples = sample_normal(rng, {0.0}, 1.0, 100000);
  double mean = 0.0;
  for (const Vec& s : samples) mean += s[0];
  mean /= samples.size();
  double var = 0.0;
  for (const Vec& s : samples) var += (s[0] - mean) * (s[0] - mean);
  var /= samples.size();
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("rng: identical seeds give byte-identical streams") {
  Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(99), d(99);
  for (int i = 0; i < 1000; ++i) CHECK(c.normal() == d.normal());
}

TEST_CASE("rng: split streams are independent of parent consumption") {
  Rng a(5);
  Rng child_before = a.split(3);
  a.next_u64();
  a.next_u64();
  Rng child_after = a.split(3);
  for (int i = 0; i < 100; ++i)
    CHECK(child_before.next_u64() == child_after.next_u64());
}
