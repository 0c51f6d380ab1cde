#include "doctest.h"

#include <cmath>

#include "dmfg/diagnostics.hpp"
#include "dmfg/horizon.hpp"
#include "support.hpp"

using namespace dmfg;
using dmfg::testing::Rng;

namespace {

CostModel congestion(double eps = 1.0) {
  Mat a(3, 3);
  a << 0.2, 0.9, 0.5, 0.7, 0.1, 0.4, 0.3, 0.8, 0.6;
  Vec b(3);
  b << 1.0, 1.5, 2.0;
  return congestion_model(CongestionSpec{a, b, eps, CongestionCoupling::origin});
}

StationarySolution tight_stationary(const CostModel& m) {
  StationaryOptions o;
  o.tol = 1e-15;
  o.perron_tol = 1e-15;
  return stationary_entropy(*m.entropy(), o);
}

/// Direct evaluation of f_n for horizon-2M trajectories (time zero at M),
/// with the euclidean quotient norm written out as a centered 2-norm.
std::vector<double> f_oracle(const Trajectory& a, const Trajectory& b) {
  const std::size_t M = a.N / 2;
  auto sq = [](const Vec& v) { return v.squaredNorm(); };
  auto sqc = [](const Vec& v) {
    const Vec c = v.array() - v.mean();
    return c.squaredNorm();
  };
  std::vector<double> f;
  for (std::size_t n = 0; n <= M; ++n) {
    double s = sq(a.pis[M + n].vec() - b.pis[M + n].vec()) + sqc(a.Vs[M + n].vec() - b.Vs[M + n].vec());
    if (n > 0) s += sq(a.pis[M - n].vec() - b.pis[M - n].vec()) + sqc(a.Vs[M - n].vec() - b.Vs[M - n].vec());
    f.push_back(s);
  }
  return f;
}

}  // namespace

TEST_CASE("N = 1 decouples") {
  Rng rng(1);
  const CostModel m = congestion();
  const Dist pi0 = testing::random_dist(rng, 3);
  const ValueVec V1(testing::random_vec(rng, 3, -1, 1));
  const Trajectory t = solve_initial_terminal(pi0, V1, 1, m);
  CHECK(t.iterations == 1);
  CHECK((t.Vs[0].vec() - apply_G(pi0, V1, m).vec()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((t.pis[1].vec() - apply_K(V1, pi0, m).vec()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(t.residual <= 1e-14);
}

TEST_CASE("zero entropy base: closed-form trajectory") {
  Rng rng(2);
  for (std::size_t d : {2u, 4u}) {
    const double eps = 0.7;
    const CostModel m = entropy_model(entropy_table_spec(Mat::Zero(d, d), eps));
    const std::size_t N = 6;
    const Trajectory t = solve_initial_terminal(testing::random_dist(rng, d), ValueVec::zero(d), N, m);
    for (std::size_t n = 0; n <= N; ++n) {
      const double expect = -static_cast<double>(N - n) * eps * std::log(double(d));
      CHECK((t.Vs[n].vec().array() - expect).abs().maxCoeff() <= 1e-12);
      if (n >= 1) CHECK((t.pis[n].vec().array() - 1.0 / d).abs().maxCoeff() <= 1e-14);
    }
  }
}

TEST_CASE("stationary seed stays put") {
  const CostModel m = congestion();
  const StationarySolution s = tight_stationary(m);
  const std::size_t N = 8;
  const Trajectory t = solve_initial_terminal(s.pi_bar, s.V_bar.rep(), N, m);
  const Trajectory ref = stationary_trajectory(s, N);
  for (std::size_t n = 0; n <= N; ++n) {
    CHECK(dist_distance(t.pis[n], ref.pis[n]) <= 1e-8);
    CHECK((t.Vs[n].vec() - ref.Vs[n].vec()).cwiseAbs().maxCoeff() <= 1e-8);
  }
  CHECK(trajectory_residual(ref, m) <= 1e-8);
  CHECK(t.residual <= 1e-8);
}

TEST_CASE("trajectory_residual detects perturbations") {
  Rng rng(3);
  const CostModel m = congestion();
  Trajectory t = solve_initial_terminal(testing::random_dist(rng, 3), ValueVec(testing::random_vec(rng, 3, -1, 1)), 4, m);
  CHECK(trajectory_residual(t, m) <= 1e-9);
  const double delta = 0.3;
  Vec v = t.Vs[0].vec();
  v(0) += delta;
  t.Vs[0] = ValueVec(v);
  CHECK(trajectory_residual(t, m) >= delta / 2 - 1e-9);
}

TEST_CASE("uniqueness across initial guesses on the monotone model") {
  Rng rng(4);
  const CostModel m =
      monotone_w_model(quadratic_monotone_spec(testing::random_mat(rng, 3, 0, 2), 2.0, 1.0));
  const StationarySolution s = stationary_generic(m);
  for (int trial = 0; trial < 3; ++trial) {
    const Dist pi0 = testing::random_dist(rng, 3);
    const ValueVec VN(testing::random_vec(rng, 3, -2, 2));
    const std::size_t N = 12;
    HorizonOptions a;
    HorizonOptions b;
    b.guess = InitialGuess::interpolate;
    b.target = s.pi_bar;
    HorizonOptions c;
    c.guess = InitialGuess::explicit_guess;
    for (std::size_t n = 0; n <= N; ++n) c.guess_sequence.push_back(testing::random_dist(rng, 3));
    const Trajectory ta = solve_initial_terminal(pi0, VN, N, m, a);
    const Trajectory tb = solve_initial_terminal(pi0, VN, N, m, b);
    const Trajectory tc = solve_initial_terminal(pi0, VN, N, m, c);
    for (std::size_t n = 0; n <= N; ++n) {
      CHECK(dist_distance(ta.pis[n], tb.pis[n]) <= 1e-6);
      CHECK(dist_distance(ta.pis[n], tc.pis[n]) <= 1e-6);
      CHECK((ta.Vs[n].vec() - tb.Vs[n].vec()).cwiseAbs().maxCoeff() <= 1e-6);
      CHECK((ta.Vs[n].vec() - tc.Vs[n].vec()).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}

TEST_CASE("solve_initial_terminal errors") {
  const CostModel m = congestion();
  CHECK_THROWS_AS(solve_initial_terminal(Dist::uniform(3), ValueVec::zero(3), 0, m), InvalidInput);
  CHECK_THROWS_AS(solve_initial_terminal(Dist::uniform(2), ValueVec::zero(3), 3, m), DimensionMismatch);
  HorizonOptions o;
  o.max_iter = 1;
  o.tol = 1e-300;
  Vec p(3);
  p << 0.9, 0.05, 0.05;
  try {
    solve_initial_terminal(Dist(p), ValueVec::zero(3), 5, m, o);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.history().size() == 1);
  }
  o = HorizonOptions{};
  o.guess = InitialGuess::interpolate;
  CHECK_THROWS_AS(solve_initial_terminal(Dist::uniform(3), ValueVec::zero(3), 2, m, o), InvalidInput);
}

TEST_CASE("f_sequence examples") {
  Rng rng(5);
  const CostModel m = congestion();
  const std::size_t N = 6;
  const Trajectory t1 = solve_initial_terminal(testing::random_dist(rng, 3), ValueVec(testing::random_vec(rng, 3, -1, 1)), N, m);
  const Trajectory t2 = solve_initial_terminal(testing::random_dist(rng, 3), ValueVec(testing::random_vec(rng, 3, -1, 1)), N, m);
  for (double f : f_sequence(t1, t1, true)) CHECK(f == 0.0);

  Trajectory shifted = t1;
  shifted.Vs[N] = ValueVec(Vec(t1.Vs[N].vec().array() + 5.0));
  shifted.Vs[0] = ValueVec(Vec(t1.Vs[0].vec().array() - 2.0));
  CHECK(f_sequence(t1, shifted, true).back() <= 1e-24);

  const auto f = f_sequence(t1, t2, true);
  const auto g = f_oracle(t1, t2);
  REQUIRE(f.size() == g.size());
  for (std::size_t n = 0; n < f.size(); ++n) CHECK(f[n] == doctest::Approx(g[n]).epsilon(1e-12));

  const auto one_sided = f_sequence(t1, t2, false);
  CHECK(one_sided.size() == N + 1);

  const Trajectory odd = solve_initial_terminal(Dist::uniform(3), ValueVec::zero(3), 3, m);
  CHECK_THROWS_AS(f_sequence(odd, odd, true), DimensionMismatch);
  CHECK_THROWS_AS(f_sequence(t1, odd, true), DimensionMismatch);
}

TEST_CASE("check_numeros examples") {
  CHECK(check_numeros({1, 1, 1, 1}, 3.0));
  const auto r = numeros_report({1, 1, 1, 1}, 3.0);
  CHECK(r.premise_ok);
  // N = 3 here, so the bound is 3 (3/4)^2.
  CHECK(r.rhs == doctest::Approx(27.0 / 16.0));

  // f_n = q^n with C = 1/(q-1): every prefix premise holds and C q >= 1.
  for (double q : {1.5, 2.0, 4.0}) {
    std::vector<double> f;
    for (int n = 0; n <= 8; ++n) f.push_back(std::pow(q, n));
    const auto g = numeros_report(f, 1.0 / (q - 1.0));
    CHECK(g.premise_ok);
    CHECK(g.conclusion_ok);
  }
  CHECK(check_numeros({0, 0, 0}, 2.0));

  const auto bad = numeros_report({1, 0, 0, 1}, 1.0);
  CHECK_FALSE(bad.premise_ok);
  CHECK(bad.first_premise_violation == 1u);
  CHECK_FALSE(bad.conclusion_ok);

  CHECK_THROWS_AS(check_numeros({1, -1}, 1.0), InvalidInput);
  CHECK_THROWS_AS(check_numeros({1}, 1.0), InvalidInput);
}

TEST_CASE("value bound and the summed estimate on random pairs") {
  Rng rng(6);
  const CostModel m = congestion();
  const double K = estimate_K_hp11(m, 500, 0);
  SampleOptions so;
  const AssumptionReport rep = assess(m, so);
  const double C = turnpike_constant(rep);
  REQUIRE(std::isfinite(C));
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t N = 2 * (2 + trial % 4);
    const ValueVec VN(testing::random_vec(rng, 3, -2, 2));
    const Trajectory a = solve_initial_terminal(testing::random_dist(rng, 3), VN, N, m);
    const Trajectory b = solve_initial_terminal(testing::random_dist(rng, 3), ValueVec(testing::random_vec(rng, 3, -2, 2)), N, m);
    const Trajectory same_end = solve_initial_terminal(testing::random_dist(rng, 3), VN, N, m);
    CHECK(check_value_bound(a, b, K));
    const ValueBound vb = value_bound(a, same_end, K);
    CHECK(vb.ok);
    CHECK(vb.rhs == doctest::Approx(static_cast<double>(N) * K));
    CHECK(check_value_bound(a, a, K));

    const auto f = f_sequence(a, b, true);
    double inner = 0.0;
    for (std::size_t n = 0; n + 1 < f.size(); ++n) inner += f[n];
    CHECK(inner <= C * f.back() * (1 + 1e-9));
    CHECK(numeros_report(f, C).premise_ok);
    CHECK(check_numeros(f, C));
  }
}

TEST_CASE("fit_log_linear") {
  std::vector<double> x{1, 2, 3, 4}, y;
  for (double v : x) y.push_back(3.0 * std::exp(-0.7 * v));
  const auto fit = fit_log_linear(x, y);
  REQUIRE(fit.has_value());
  CHECK(fit->slope == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(fit->intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  CHECK(fit->r_squared == doctest::Approx(1.0));
  CHECK_FALSE(fit_log_linear({1, 2}, {1, 0.5}).has_value());
  CHECK_FALSE(fit_log_linear({1, 2, 3}, {1, 1e-13, 1e-14}).has_value());
}

TEST_CASE("turnpike sweep on the congestion model") {
  const CostModel m = congestion();
  const StationarySolution s = tight_stationary(m);
  Vec p0(3);
  p0 << 0.8, 0.15, 0.05;
  Vec vt(3);
  vt << 3, -1, 0;
  std::vector<std::size_t> Ns;
  for (std::size_t N = 2; N <= 20; ++N) Ns.push_back(N);
  TurnpikeOptions o;
  o.horizon.tol = 1e-14;
  o.threads = 1;
  const TurnpikeReport r = turnpike_sweep(m, Dist(p0), ValueVec(vt), Ns, s, o);
  REQUIRE(r.fit.has_value());
  CHECK(r.fitted_rate < 0.0);
  CHECK(r.fit->r_squared > 0.95);
  CHECK(std::isfinite(r.C_est));
  CHECK(r.numeros_premise_ok);
  CHECK(r.numeros_ok);
  for (const auto& f : r.failures) CHECK(f.empty());
  CHECK(r.f_seq.size() == 21);

  o.threads = 4;
  const TurnpikeReport r4 = turnpike_sweep(m, Dist(p0), ValueVec(vt), Ns, s, o);
  CHECK(r4.dist_pi == r.dist_pi);
  CHECK(r4.dist_V == r.dist_V);
  CHECK(r4.f_seq == r.f_seq);
}

TEST_CASE("turnpike degenerate cases") {
  const CostModel m = congestion();
  const StationarySolution s = tight_stationary(m);
  TurnpikeOptions o;
  o.C_est = 10.0;
  const TurnpikeReport flat = turnpike_sweep(m, s.pi_bar, s.V_bar.rep(), {1, 2, 3, 4}, s, o);
  for (double d : flat.dist_pi) CHECK(d <= 1e-8);
  for (double d : flat.dist_V) CHECK(d <= 1e-8);

  const TurnpikeReport single = turnpike_sweep(m, s.pi_bar, s.V_bar.rep(), {3}, s, o);
  CHECK_FALSE(single.fit.has_value());
  CHECK(std::isnan(single.fitted_rate));

  const CostModel zero = entropy_model(entropy_table_spec(Mat::Zero(3, 3), 1.0));
  const StationarySolution sz = stationary_entropy(*zero.entropy());
  Vec p0(3);
  p0 << 0.7, 0.2, 0.1;
  const TurnpikeReport absorb = turnpike_sweep(zero, Dist(p0), ValueVec::zero(3), {1, 2}, sz, o);
  CHECK(absorb.dist_pi[0] <= 1e-14);
  CHECK_THROWS_AS(turnpike_sweep(m, s.pi_bar, s.V_bar.rep(), {}, s, o), InvalidInput);
}

TEST_CASE("turnpike reports failed solves") {
  const CostModel m = congestion();
  const StationarySolution s = tight_stationary(m);
  TurnpikeOptions o;
  o.C_est = 10.0;
  o.horizon.max_iter = 1;
  o.horizon.tol = 1e-300;
  Vec p0(3);
  p0 << 0.8, 0.15, 0.05;
  const TurnpikeReport r = turnpike_sweep(m, Dist(p0), ValueVec::zero(3), {2, 3}, s, o);
  CHECK_FALSE(r.failures[0].empty());
  CHECK(std::isnan(r.dist_pi[1]));
  CHECK(r.f_seq.empty());
}

TEST_CASE("thread count from the environment") {
  setenv("DMFG_THREADS", "3", 1);
  CHECK(thread_count_from_env() == 3u);
  setenv("DMFG_THREADS", "zero", 1);
  CHECK(thread_count_from_env() == 1u);
  unsetenv("DMFG_THREADS");
  CHECK(thread_count_from_env() == 1u);
}
