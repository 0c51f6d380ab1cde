#include "dmfg/horizon.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "dmfg/diagnostics.hpp"

namespace dmfg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<Vec> initial_sequence(const Dist& pi0, std::size_t N, const HorizonOptions& opts) {
  std::vector<Vec> seq(N + 1, pi0.vec());
  switch (opts.guess) {
    case InitialGuess::constant:
      break;
    case InitialGuess::interpolate: {
      if (!opts.target) throw InvalidInput("solve_initial_terminal: interpolation needs a target");
      require_same_size(opts.target->size(), pi0.size(), "solve_initial_terminal: target");
      for (std::size_t n = 0; n <= N; ++n) {
        const double s = static_cast<double>(n) / static_cast<double>(N);
        seq[n] = (1.0 - s) * pi0.vec() + s * opts.target->vec();
      }
      break;
    }
    case InitialGuess::explicit_guess: {
      if (opts.guess_sequence.size() != N + 1) {
        throw DimensionMismatch("solve_initial_terminal: guess sequence needs N+1 entries");
      }
      for (std::size_t n = 1; n <= N; ++n) {
        require_same_size(opts.guess_sequence[n].size(), pi0.size(), "solve_initial_terminal: guess");
        seq[n] = opts.guess_sequence[n].vec();
      }
      break;
    }
  }
  return seq;
}

/// Backward pass at a fixed pi-sequence: fills Vs and Ps.
void backward(const std::vector<Vec>& pis, const ValueVec& VN, const CostModel& model,
              const NashOptions& nash, std::vector<ValueVec>& Vs, std::vector<StochMatrix>& Ps) {
  const std::size_t N = pis.size() - 1;
  Vs.assign(N + 1, VN);
  Ps.assign(N, StochMatrix::identity(VN.size()));
  for (std::size_t n = N; n-- > 0;) {
    StepResult s = evolve_step(Dist(pis[n]), Vs[n + 1], model, nash);
    Vs[n] = s.G;
    Ps[n] = std::move(s.nash.P);
  }
}

}  // namespace

unsigned thread_count_from_env() {
  const char* env = std::getenv("DMFG_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) return 1;
  return static_cast<unsigned>(std::min<long>(v, 256));
}

Trajectory solve_initial_terminal(const Dist& pi0, const ValueVec& VN, std::size_t N,
                                  const CostModel& model, const HorizonOptions& opts) {
  if (N < 1) throw InvalidInput("solve_initial_terminal: N must be >= 1");
  require_same_size(pi0.size(), model.dim(), "solve_initial_terminal: pi0");
  require_same_size(VN.size(), model.dim(), "solve_initial_terminal: VN");
  if (!(opts.tol > 0.0)) throw InvalidInput("solve_initial_terminal: tol must be positive");

  std::vector<Vec> pis = initial_sequence(pi0, N, opts);
  std::vector<ValueVec> Vs;
  std::vector<StochMatrix> Ps;
  Relaxation relax(opts.omega, opts.omega_floor, opts.adaptive);
  std::vector<double> history;

  for (int it = 0;; ++it) {
    if (it >= opts.max_iter) {
      throw NonConvergence("solve_initial_terminal: iteration cap reached", std::move(history));
    }
    backward(pis, VN, model, opts.nash, Vs, Ps);
    // Forward pass; pi^N never feeds back, so only 1..N-1 count as change.
    std::vector<Vec> next(N + 1);
    next[0] = pi0.vec();
    double change = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      next[n + 1] = apply_K(Vs[n + 1], Dist(next[n]), model, opts.nash).vec();
      if (n + 1 < N) change = std::max(change, (next[n + 1] - pis[n + 1]).cwiseAbs().maxCoeff());
    }
    history.push_back(change);
    if (change <= opts.tol) {
      pis = std::move(next);
      backward(pis, VN, model, opts.nash, Vs, Ps);
      Trajectory t;
      t.N = N;
      for (const Vec& p : pis) t.pis.emplace_back(p);
      t.Vs = std::move(Vs);
      t.Ps = std::move(Ps);
      t.iterations = it + 1;
      t.history = std::move(history);
      t.residual = trajectory_residual(t, model, NormKind::sup, opts.nash);
      return t;
    }
    relax.observe(change);
    const double w = relax.omega();
    for (std::size_t n = 1; n <= N; ++n) pis[n] = (1.0 - w) * pis[n] + w * next[n];
  }
}

double trajectory_residual(const Trajectory& t, const CostModel& model, NormKind value_norm,
                           const NashOptions& nash) {
  if (t.pis.size() != t.N + 1 || t.Vs.size() != t.N + 1) {
    throw DimensionMismatch("trajectory_residual: inconsistent trajectory lengths");
  }
  double r = 0.0;
  for (std::size_t n = 0; n < t.N; ++n) {
    const StepResult s = evolve_step(t.pis[n], t.Vs[n + 1], model, nash);
    r = std::max(r, sharp_norm(Vec(t.Vs[n].vec() - s.G.vec()), value_norm));
    r = std::max(r, (t.pis[n + 1].vec() - s.K.vec()).norm());
  }
  return r;
}

Trajectory stationary_trajectory(const StationarySolution& s, std::size_t N) {
  Trajectory t;
  t.N = N;
  t.pis.assign(N + 1, s.pi_bar);
  for (std::size_t n = 0; n <= N; ++n) {
    const double shift = static_cast<double>(N - n) * s.lambda_bar;
    t.Vs.emplace_back(Vec(s.V_bar.rep().vec().array() + shift));
  }
  t.Ps.assign(N, s.P_bar);
  return t;
}

std::vector<double> f_sequence(const Trajectory& t1, const Trajectory& t2, bool centered_at_zero,
                               NormKind value_norm) {
  if (t1.N != t2.N || t1.pis.size() != t2.pis.size() || t1.Vs.size() != t2.Vs.size()) {
    throw DimensionMismatch("f_sequence: horizon mismatch");
  }
  auto term = [&](std::size_t k) {
    const double dp = (t1.pis[k].vec() - t2.pis[k].vec()).squaredNorm();
    const double dv = sharp_norm(Vec(t1.Vs[k].vec() - t2.Vs[k].vec()), value_norm);
    return dp + dv * dv;
  };
  std::vector<double> f;
  if (!centered_at_zero) {
    for (std::size_t k = 0; k <= t1.N; ++k) f.push_back(term(k));
    return f;
  }
  if (t1.N % 2 != 0) throw DimensionMismatch("f_sequence: centered sequences need an even horizon");
  const std::size_t M = t1.N / 2;
  f.push_back(term(M));
  for (std::size_t n = 1; n <= M; ++n) f.push_back(term(M + n) + term(M - n));
  return f;
}

NumerosReport numeros_report(const std::vector<double>& f, double C) {
  if (f.size() < 2) throw InvalidInput("check_numeros: need f_0 .. f_N with N >= 1");
  if (!(C > 0.0)) throw InvalidInput("check_numeros: C must be positive");
  for (double x : f) {
    if (!(x >= 0.0)) throw InvalidInput("check_numeros: f entries must be nonnegative");
  }
  NumerosReport r{true, std::nullopt, f.front(), 0.0, false};
  double partial = 0.0;
  for (std::size_t M = 1; M < f.size(); ++M) {
    partial += f[M - 1];
    if (partial > C * f[M] * (1.0 + 1e-9) && !r.first_premise_violation) {
      r.premise_ok = false;
      r.first_premise_violation = M;
    }
  }
  const double N = static_cast<double>(f.size() - 1);
  r.rhs = C * std::pow(C / (C + 1.0), N - 1.0) * f.back();
  r.conclusion_ok = r.lhs <= r.rhs * (1.0 + 1e-9);
  return r;
}

bool check_numeros(const std::vector<double>& f, double C) {
  return numeros_report(f, C).conclusion_ok;
}

ValueBound value_bound(const Trajectory& t1, const Trajectory& t2, double K_est) {
  if (t1.N != t2.N || t1.Vs.size() != t2.Vs.size() || t1.Vs.size() != t1.N + 1) {
    throw DimensionMismatch("check_value_bound: horizon mismatch");
  }
  if (t1.N % 2 != 0) throw DimensionMismatch("check_value_bound: horizon must be 2M");
  const double M = static_cast<double>(t1.N / 2);
  const double lhs = (t1.Vs.front().vec() - t2.Vs.front().vec()).cwiseAbs().maxCoeff();
  const double rhs = (t1.Vs.back().vec() - t2.Vs.back().vec()).cwiseAbs().maxCoeff() + 2.0 * M * K_est;
  return ValueBound{lhs, rhs, lhs <= rhs + 1e-9 * std::max(1.0, std::abs(rhs))};
}

bool check_value_bound(const Trajectory& t1, const Trajectory& t2, double K_est) {
  return value_bound(t1, t2, K_est).ok;
}

std::optional<LogLinearFit> fit_log_linear(const std::vector<double>& x,
                                           const std::vector<double>& y, double floor) {
  if (x.size() != y.size()) throw DimensionMismatch("fit_log_linear: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (std::isfinite(y[k]) && y[k] >= floor) {
      xs.push_back(x[k]);
      ys.push_back(std::log(y[k]));
    }
  }
  if (xs.size() < 3) return std::nullopt;
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  if (sxx == 0.0) return std::nullopt;
  const double slope = sxy / sxx;
  const double r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return LogLinearFit{slope, my - slope * mx, r2, xs.size()};
}

TurnpikeReport turnpike_sweep(const CostModel& model, const Dist& pi_init, const ValueVec& V_term,
                              const std::vector<std::size_t>& Ns, const StationarySolution& stat,
                              const TurnpikeOptions& opts) {
  if (Ns.empty()) throw InvalidInput("turnpike_sweep: empty list of horizons");
  for (std::size_t N : Ns) {
    if (N < 1) throw InvalidInput("turnpike_sweep: horizons must be >= 1");
  }
  const std::size_t k = Ns.size();
  std::vector<std::optional<Trajectory>> sols(k);
  std::vector<std::string> failures(k);

  auto solve_one = [&](std::size_t idx) {
    try {
      sols[idx] = solve_initial_terminal(pi_init, V_term, 2 * Ns[idx], model, opts.horizon);
    } catch (const Error& e) {
      failures[idx] = e.what();
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(
                                            opts.threads ? opts.threads : thread_count_from_env(),
                                            static_cast<unsigned>(k)));
  if (threads == 1) {
    for (std::size_t idx = 0; idx < k; ++idx) solve_one(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t idx; (idx = next.fetch_add(1)) < k;) solve_one(idx);
      });
    }
    for (auto& th : pool) th.join();
  }

  TurnpikeReport rep;
  rep.Ns = Ns;
  rep.failures = failures;
  std::vector<double> xs;
  std::size_t largest = k;
  for (std::size_t idx = 0; idx < k; ++idx) {
    if (!sols[idx]) {
      rep.dist_pi.push_back(kNaN);
      rep.dist_V.push_back(kNaN);
      rep.residuals.push_back(kNaN);
      xs.push_back(static_cast<double>(Ns[idx]));
      continue;
    }
    const Trajectory& t = *sols[idx];
    const std::size_t mid = Ns[idx];
    rep.dist_pi.push_back((t.pis[mid].vec() - stat.pi_bar.vec()).norm());
    rep.dist_V.push_back(
        sharp_norm(Vec(t.Vs[mid].vec() - stat.V_bar.rep().vec()), opts.value_norm));
    rep.residuals.push_back(t.residual);
    xs.push_back(static_cast<double>(Ns[idx]));
    if (largest == k || Ns[idx] > Ns[largest]) largest = idx;
  }

  rep.fit = fit_log_linear(xs, rep.dist_pi);
  rep.fitted_rate = rep.fit ? rep.fit->slope : kNaN;

  if (opts.C_est) {
    rep.C_est = *opts.C_est;
  } else {
    SampleOptions so;
    so.n_samples = opts.diagnostic_samples;
    so.seed = opts.seed;
    so.value_norm = opts.f_norm;
    so.nash = opts.horizon.nash;
    rep.C_est = turnpike_constant(assess(model, so));
  }

  rep.numeros_ok = false;
  rep.numeros_premise_ok = false;
  if (largest < k) {
    const Trajectory& t = *sols[largest];
    rep.f_seq = f_sequence(t, stationary_trajectory(stat, t.N), true, opts.f_norm);
    if (std::isfinite(rep.C_est) && rep.C_est > 0.0) {
      const NumerosReport nr = numeros_report(rep.f_seq, rep.C_est);
      rep.numeros_ok = nr.conclusion_ok;
      rep.numeros_premise_ok = nr.premise_ok;
    }
  }

  // Burn-in: first index after which distances above the floating-point floor
  // never increase.
  rep.burn_in = 0;
  double prev = kNaN;
  for (std::size_t idx = 0; idx < k; ++idx) {
    const double d = rep.dist_pi[idx];
    if (!std::isfinite(d) || d < 1e-12) continue;
    if (std::isfinite(prev) && d > prev) rep.burn_in = idx;
    prev = d;
  }
  return rep;
}

}  // namespace dmfg
