#include <doctest.h>

#include <cmath>

#include "protoflow/errors.hpp"
#include "protoflow/losses.hpp"
#include "protoflow/rng.hpp"

using namespace protoflow;

TEST_CASE("ce_loss: saturated, uniform, out-of-range") {
  CHECK(ce_loss({{100.0, 0.0}}, {0}) == doctest::Approx(0.0).epsilon(1e-12));

  const int k = 5;
  CHECK(ce_loss({Vec(k, 0.7)}, {2}) == doctest::Approx(std::log(double(k))));

  CHECK_THROWS_AS(ce_loss({{1.0, 2.0}}, {5}), ArgumentError);
}

TEST_CASE("kl_distill: direct evaluation of the tempered KL") {
  // teacher (ln 3, 0), student (0, 0), T=1: KL((0.75,0.25)||(0.5,0.5)).
  const double expected = 0.75 * std::log(1.5) + 0.25 * std::log(0.5);
  const double loss = kl_distill({{std::log(3.0), 0.0}}, {{0.0, 0.0}}, 1.0, {0, 1});
  CHECK(loss == doctest::Approx(expected).epsilon(1e-9));
  CHECK(loss == doctest::Approx(0.1308).epsilon(1e-3));
}

TEST_CASE("kl_distill: zero at agreement, shift invariance, empty old set") {
  const std::vector<Vec> t{{0.4, -0.3, 1.0}};
  CHECK(kl_distill(t, t, 2.0, {0, 1, 2}) == doctest::Approx(0.0));

  const std::vector<Vec> s{{1.1, 0.3, -0.2}};
  const double base = kl_distill(t, s, 2.0, {0, 1, 2});
  std::vector<Vec> t_shift = t, s_shift = s;
  for (double& v : t_shift[0]) v += 7.0;
  for (double& v : s_shift[0]) v -= 3.0;
  CHECK(kl_distill(t_shift, s_shift, 2.0, {0, 1, 2}) ==
        doctest::Approx(base).epsilon(1e-9));

  CHECK(kl_distill(t, s, 2.0, {}) == 0.0);
}

TEST_CASE("curvature_loss: collinear triple, right-angle triple, empty set") {
  CHECK(curvature_loss({{{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}}}) == doctest::Approx(0.0));

  // (0,0),(1,0),(1,1): second difference (-1,1), squared norm 2.
  CHECK(curvature_loss({{{0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}}}) == doctest::Approx(2.0));

  CHECK(curvature_loss({}) == 0.0);
}

TEST_CASE("curvature_loss: translation invariance of raw prototypes") {
  Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    CurvatureTriple t{{rng.normal(), rng.normal()},
                      {rng.normal(), rng.normal()},
                      {rng.normal(), rng.normal()}};
    const double base = curvature_loss({t});
    const Vec offset{rng.normal(), rng.normal()};
    CurvatureTriple shifted{add(t.oldest, offset), add(t.mid, offset),
                            add(t.newest, offset)};
    CHECK(curvature_loss({shifted}) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("separation_loss: inactive hinge, ordered-pair double count, collapse") {
  CHECK(separation_loss({{0.0, 0.0}, {1.0, 0.0}}, 0.5) == doctest::Approx(0.0));

  // distance 0.3, margin 0.5: 2 * 0.2^2 = 0.08.
  CHECK(separation_loss({{0.0, 0.0}, {0.3, 0.0}}, 0.5) == doctest::Approx(0.08));

  // three identical prototypes: 6 ordered pairs at distance 0 -> 6 * 0.25.
  const Vec p{0.5, 0.5};
  CHECK(separation_loss({p, p, p}, 0.5) == doctest::Approx(1.5));

  CHECK(separation_loss({p}, 0.5) == 0.0);
}

TEST_CASE("separation_loss: relabeling symmetry and rotation invariance") {
  Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec> protos;
    for (int c = 0; c < 4; ++c) protos.push_back({rng.normal(), rng.normal()});
    const double base = separation_loss(protos, 0.8);

    std::vector<Vec> relabeled{protos[2], protos[0], protos[3], protos[1]};
    CHECK(separation_loss(relabeled, 0.8) == doctest::Approx(base).epsilon(1e-12));

    const double theta = rng.uniform(0.0, 2.0 * M_PI);
    std::vector<Vec> rotated;
    for (const Vec& p : protos)
      rotated.push_back({p[0] * std::cos(theta) - p[1] * std::sin(theta),
                         p[0] * std::sin(theta) + p[1] * std::cos(theta)});
    CHECK(separation_loss(rotated, 0.8) == doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("total_loss: weighting, zero-lambda degeneration, non-finite rejection") {
  LossWeights w;  // defaults: 1.0, 1.0, 0.5, 0.1
  const LossBreakdown b = total_loss(1.0, 0.5, 0.2, 0.4, 0.1, w);
  CHECK(b.total == doctest::Approx(1.91));
  CHECK(b.total == doctest::Approx(b.seg + w.lambda_dist * b.dist + w.lambda_flow * b.flow +
                                   w.lambda_curve * b.curve + w.lambda_sep * b.sep));

  LossWeights zero;
  zero.lambda_dist = zero.lambda_flow = zero.lambda_curve = zero.lambda_sep = 0.0;
  CHECK(total_loss(0.7, 9.0, 9.0, 9.0, 9.0, zero).total == doctest::Approx(0.7));

  CHECK_THROWS_AS(
      total_loss(std::numeric_limits<double>::infinity(), 0, 0, 0, 0, w), NumericError);
}

TEST_CASE("losses are nonnegative on random instances") {
  Rng rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Vec> lg{{rng.normal(), rng.normal(), rng.normal()}};
    CHECK(ce_loss(lg, {rng.uniform_index(3)}) >= 0.0);

    std::vector<Vec> tg{{rng.normal(), rng.normal(), rng.normal()}};
    CHECK(kl_distill(tg, lg, 2.0, {0, 1}) >= 0.0);

    std::vector<Vec> protos;
    for (int c = 0; c < 3; ++c) protos.push_back({rng.normal(), rng.normal()});
    CHECK(separation_loss(protos, 0.5) >= 0.0);
    CHECK(curvature_loss({{protos[0], protos[1], protos[2]}}) >= 0.0);
  }
}
