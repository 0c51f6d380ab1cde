#include "doctest.h"

#include <cmath>

#include "dmfg/core.hpp"
#include "support.hpp"

using namespace dmfg;
using dmfg::testing::Rng;

TEST_CASE("Dist validates, clamps and renormalizes") {
  Vec v(3);
  v << 0.5, 0.5 + 1e-13, -5e-13;
  Dist p(v);
  CHECK(p[2] == 0.0);
  CHECK(std::abs(p.vec().sum() - 1.0) <= 1e-15);

  Vec neg(2);
  neg << 1.1, -0.1;
  CHECK_THROWS_AS(Dist{neg}, InvalidInput);
  Vec one(1);
  one << 1.0;
  CHECK_THROWS_AS(Dist{one}, InvalidInput);
  Vec nan(2);
  nan << std::nan(""), 0.5;
  CHECK_THROWS_AS(Dist{nan}, InvalidInput);
  Vec off(2);
  off << 0.5, 0.6;
  CHECK_THROWS_AS(Dist{off}, InvalidInput);
}

TEST_CASE("ValueClass canonical form is mean-zero and idempotent") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    ValueVec v(testing::random_vec(rng, 4, -10, 10));
    ValueClass c(v);
    CHECK(std::abs(c.rep().vec().sum()) <= 1e-12);
    ValueClass cc(c.rep());
    CHECK((cc.rep().vec() - c.rep().vec()).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("sharp_norm examples") {
  Vec c = Vec::Constant(5, 3.7);
  CHECK(sharp_norm(c, NormKind::sup) == 0.0);
  CHECK(sharp_norm(c, NormKind::euclid) == doctest::Approx(0.0).epsilon(1e-15));

  Vec v(2);
  v << 3, 1;
  CHECK(sharp_norm(v, NormKind::sup) == 1.0);

  // 1-D brute force over the shift for v = (1, -1, 0).
  Vec w(3);
  w << 1, -1, 0;
  double best = std::numeric_limits<double>::infinity();
  double best_shift = 0.0;
  for (int k = -200000; k <= 200000; ++k) {
    const double lambda = k * 1e-5;
    const double val = (w.array() + lambda).matrix().norm();
    if (val < best) {
      best = val;
      best_shift = lambda;
    }
  }
  CHECK(std::abs(best_shift - (-w.mean())) <= 1e-5);
  CHECK(sharp_norm(w, NormKind::euclid) == doctest::Approx(best).epsilon(1e-9));

  Vec bad(2);
  bad << 1.0, INFINITY;
  CHECK_THROWS_AS(sharp_norm(bad, NormKind::sup), InvalidInput);
}

TEST_CASE("sharp_norm properties") {
  Rng rng(11);
  std::uniform_real_distribution<double> shift(-100, 100);
  for (NormKind kind : {NormKind::sup, NormKind::euclid}) {
    for (int t = 0; t < 1000; ++t) {
      const Vec a = testing::random_vec(rng, 5, -5, 5);
      const Vec b = testing::random_vec(rng, 5, -5, 5);
      const Vec c = testing::random_vec(rng, 5, -5, 5);
      const double s = shift(rng);
      CHECK(std::abs(sharp_norm(Vec(a.array() + s), kind) - sharp_norm(a, kind)) <= 1e-12);
      CHECK(sharp_norm(a, kind) <= vec_norm(a, kind) + 1e-15);
      CHECK(sharp_norm(Vec(a - c), kind) <=
            sharp_norm(Vec(a - b), kind) + sharp_norm(Vec(b - c), kind) + 1e-12);
    }
  }
}

TEST_CASE("push_forward examples") {
  const Dist u = Dist::uniform(4);
  const Dist out = push_forward(u, StochMatrix::identity(4));
  CHECK((out.vec() - u.vec()).cwiseAbs().maxCoeff() <= 1e-15);

  Rng rng(3);
  const Dist q = testing::random_dist(rng, 4);
  Mat rank_one(4, 4);
  for (int i = 0; i < 4; ++i) rank_one.row(i) = q.vec().transpose();
  const Dist absorbed = push_forward(testing::random_dist(rng, 4), StochMatrix(rank_one));
  CHECK((absorbed.vec() - q.vec()).cwiseAbs().maxCoeff() <= 1e-15);

  Vec pi(2);
  pi << 0.3, 0.7;
  Mat P(2, 2);
  P << 0.5, 0.5, 0.2, 0.8;
  const Dist r = push_forward(Dist(pi), StochMatrix(P));
  CHECK(r[0] == doctest::Approx(0.29).epsilon(1e-14));
  CHECK(r[1] == doctest::Approx(0.71).epsilon(1e-14));

  CHECK_THROWS_AS(push_forward(Dist::uniform(3), StochMatrix::identity(2)), DimensionMismatch);
}

TEST_CASE("push_forward preserves the simplex") {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 2 + t % 7;
    const Dist out = push_forward(testing::random_dist(rng, d), testing::random_stoch(rng, d));
    CHECK(out.vec().minCoeff() >= -1e-15);
    CHECK(std::abs(out.vec().sum() - 1.0) <= 1e-12);
  }
}

TEST_CASE("project_simplex examples") {
  Rng rng(9);
  const Dist p = testing::random_dist(rng, 5);
  CHECK((project_simplex(p.vec()).vec() - p.vec()).cwiseAbs().maxCoeff() <= 1e-15);

  Vec x(2);
  x << 2, 0;
  const Dist v = project_simplex(x);
  CHECK(v[0] == 1.0);
  CHECK(v[1] == 0.0);

  // Grid oracle for x = (0.6, 0.6).
  Vec y(2);
  y << 0.6, 0.6;
  const auto grid = testing::grid_minimize_simplex(
      2, 1e-4, [&](const Vec& q) { return (q - y).squaredNorm(); });
  const Dist proj = project_simplex(y);
  CHECK((proj.vec() - grid.argmin).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(proj[0] == doctest::Approx(0.5));

  Vec bad(2);
  bad << NAN, 1;
  CHECK_THROWS_AS(project_simplex(bad), InvalidInput);
}

TEST_CASE("project_simplex is the nearest simplex point") {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    const Vec x = testing::random_vec(rng, 3, -2, 2);
    const Dist p = project_simplex(x);
    const auto grid = testing::grid_minimize_simplex(
        3, 5e-3, [&](const Vec& q) { return (q - x).squaredNorm(); });
    CHECK((p.vec() - x).squaredNorm() <= grid.value + 1e-12);
  }
}

TEST_CASE("EdgeMeasure holonomy residual") {
  Mat eta(2, 2);
  eta << 0.4, 0.1, 0.1, 0.4;
  CHECK(EdgeMeasure(eta).is_stationary(1e-15));
  eta << 0.4, 0.2, 0.0, 0.4;
  EdgeMeasure m(eta);
  CHECK(m.holonomy_residual() == doctest::Approx(0.2));
  CHECK_FALSE(m.is_stationary(1e-6));
}

TEST_CASE("StochMatrix row helpers") {
  Rng rng(2);
  const StochMatrix P = testing::random_stoch(rng, 4);
  const StochMatrix R = P.row_replaced(1, 3);
  for (int j = 0; j < 4; ++j) {
    CHECK(R(3, j) == P(1, j));
    CHECK(R(0, j) == P(0, j));
    CHECK(R(1, j) == P(1, j));
    CHECK(R(2, j) == P(2, j));
  }
  const Dist q = testing::random_dist(rng, 4);
  const StochMatrix W = P.with_row(2, q);
  for (int j = 0; j < 4; ++j) CHECK(W(2, j) == q[j]);
}
