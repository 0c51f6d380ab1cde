// Acceptance suite: one line per criterion, non-zero exit if any fails.
// Oracles are written out here and never call the solver being checked.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dmfg/diagnostics.hpp"
#include "dmfg/horizon.hpp"
#include "dmfg/stationary.hpp"
#include "support.hpp"

using namespace dmfg;
using dmfg::testing::Rng;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

/// Tracks the worst value of a quantity that must stay below a bound.
struct Worst {
  double value = 0.0;
  bool ok = true;
  void below(double x, double bound) {
    value = std::max(value, x);
    if (!(x <= bound)) ok = false;
  }
};

Dist two_state(double theta) {
  Vec p(2);
  p << theta, 1.0 - theta;
  return Dist(p);
}

Mat congestion_a() {
  Mat a(3, 3);
  a << 0.2, 0.9, 0.5, 0.7, 0.1, 0.4, 0.3, 0.8, 0.6;
  return a;
}

Vec congestion_b() {
  Vec b(3);
  b << 1.0, 1.5, 2.0;
  return b;
}

CostModel congestion(double eps) {
  return congestion_model(CongestionSpec{congestion_a(), congestion_b(), eps, CongestionCoupling::origin});
}

// --------------------------------------------------------------------------

Outcome theta_family() {
  const auto t0 = std::chrono::steady_clock::now();
  const CostModel m = theta_example_model();
  Worst res, lam;
  bool identity = true;
  for (double theta : {0.1, 0.3, 0.5, 0.9}) {
    const auto r = stationary_residuals(two_state(theta), ValueVec::zero(2), theta, m);
    res.below(std::max({r.value, r.lambda, r.dist}), 1e-12);
    identity = identity && r.P.mat().isIdentity(0.0);
    StationaryOptions o;
    o.initial_pi = two_state(theta);
    o.initial_V = ValueVec::zero(2);
    const auto s = stationary_generic(m, o);
    lam.below(std::abs(s.lambda_bar - theta), 1e-10);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {res.ok && lam.ok && identity && secs < 1.0,
          "max residual " + fmt("%.2e", res.value) + ", max |lambda - theta| " + fmt("%.2e", lam.value) +
              ", " + fmt("%.3f", secs) + " s"};
}

Outcome entropy_symmetric() {
  Worst err;
  for (std::size_t d : {2u, 3u, 5u}) {
    for (double eps : {0.5, 1.0, 10.0}) {
      const auto n = static_cast<Eigen::Index>(d);
      const EntropyCostSpec spec = entropy_table_spec(Mat::Zero(n, n), eps);
      const double closed = -eps * std::log(static_cast<double>(d));
      Rng rng(d * 100 + static_cast<std::size_t>(eps * 10));
      const Dist pi = testing::random_dist(rng, d);
      const StochMatrix P = entropy_P(pi, ValueVec::zero(d), spec);
      err.below((P.mat().array() - 1.0 / static_cast<double>(d)).abs().maxCoeff(), 1e-12);
      const ValueVec G = entropy_G(pi, ValueVec::zero(d), spec);
      err.below((G.vec().array() - closed).abs().maxCoeff(), 1e-12);
      err.below(std::abs(stationary_entropy(spec).lambda_bar - closed), 1e-12);
    }
  }
  return {err.ok, "max error " + fmt("%.2e", err.value) + " over 9 (d, eps) pairs"};
}

Outcome closed_form_oracle() {
  Rng rng(2024);
  Worst err;
  int instances = 0;
  for (std::size_t d : {2u, 3u}) {
    for (int t = 0; t < 20; ++t, ++instances) {
      const Mat a = testing::random_mat(rng, d, 0, 2);
      const Vec b = testing::random_vec(rng, d, 0, 2);
      std::uniform_real_distribution<double> ue(0.3, 2.0);
      const double eps = ue(rng);
      const Dist pi = testing::random_dist(rng, d);
      const Vec V = testing::random_vec(rng, d, -1, 1);
      const CostModel m = congestion_model(CongestionSpec{a, b, eps, CongestionCoupling::origin});
      const StochMatrix P = entropy_P(pi, ValueVec(V), *m.entropy());
      for (std::size_t i = 0; i < d; ++i) {
        // Bare costs c_ij = a_ij + b_i pi_i; e_i adds eps ln q_j and V_j.
        const Vec c = (a.row(static_cast<Eigen::Index>(i)).transpose().array() + b(i) * pi[i]).matrix();
        const auto grid = testing::grid_minimize_simplex(
            d, 1e-3, [&](const Vec& q) { return testing::entropy_row_objective(q, c, V, eps); });
        err.below((P.mat().row(static_cast<Eigen::Index>(i)).transpose() - grid.argmin).cwiseAbs().maxCoeff(), 2e-3);
      }
    }
  }
  return {err.ok, "max sup distance to grid argmin " + fmt("%.2e", err.value) + " on " +
                      std::to_string(instances) + " instances"};
}

Outcome eigen_conjugation() {
  Rng rng(77);
  Worst eig, rep;
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 2 + static_cast<std::size_t>(t % 5);
    std::uniform_real_distribution<double> ue(0.3, 3.0);
    const CongestionSpec cs{testing::random_mat(rng, d, 0, 3), testing::random_vec(rng, d, 0.2, 2), ue(rng),
                            CongestionCoupling::origin};
    const CostModel m = congestion_model(cs);
    const EntropyCostSpec& spec = *m.entropy();

    const Dist pi = testing::random_dist(rng, d);
    const PerronResult pr = perron_eigen(pi, spec);
    const Vec r = entropy_G(pi, pr.V_pi, spec).vec() - pr.V_pi.vec();
    // Sup quotient norm (half the oscillation) plus the mean offset, so lambda
    // itself is checked too.
    const Vec g = r.array() - pr.lambda_pi;
    eig.below(0.5 * (g.maxCoeff() - g.minCoeff()) + std::abs(g.mean()), 1e-8);

    const StationarySolution s = stationary_entropy(spec);
    // lambda = sum_ij pi_i P_ij c_ij with the entropy term written out.
    double lam = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double p = s.P_bar(i, j);
        if (p > 0) lam += s.pi_bar[i] * p * (cs.a(i, j) + cs.b(i) * s.pi_bar[i] + cs.epsilon * std::log(p));
      }
    }
    rep.below(std::abs(lam - s.lambda_bar), 1e-8);
  }
  return {eig.ok && rep.ok, "max eigen residual " + fmt("%.2e", eig.value) + ", max representation error " +
                                fmt("%.2e", rep.value) + " on 20 instances"};
}

Outcome inequality_suites() {
  Rng rng(31);
  std::vector<CostModel> models;
  const std::size_t d = 3;
  models.push_back(entropy_model(entropy_table_spec(testing::random_mat(rng, d, 0, 2), 0.7)));
  models.push_back(monotone_w_model(quadratic_monotone_spec(testing::random_mat(rng, d, 0, 1), 1.0, 1.0)));
  models.push_back(monotone_w_model(quadratic_monotone_spec(testing::random_mat(rng, d, 0, 1), 2.0, 0.0),
                                    "monotone_w_linear"));
  models.push_back(theta_example_model());
  models.push_back(congestion_model(CongestionSpec{testing::random_mat(rng, d, 0, 1),
                                                   testing::random_vec(rng, d, 0.5, 2), 1.0,
                                                   CongestionCoupling::origin}));
  models.push_back(congestion_model(CongestionSpec{testing::random_mat(rng, d, 0, 1),
                                                   testing::random_vec(rng, d, 0.5, 2), 1.0,
                                                   CongestionCoupling::destination},
                                    "congestion_destination"));
  models.push_back(constant_table_model(testing::random_mat(rng, d, 0, 3)));
  models.push_back(quadratic_row_model(testing::random_mat(rng, d, 0, 1), 1.5, testing::random_vec(rng, d, 0, 1)));

  bool ok = true;
  std::size_t checked = 0;
  std::string failures;
  for (const auto& m : models) {
    SampleOptions o;
    o.n_samples = 500;
    o.seed = 11;
    o.slack = 1e-10;
    const std::vector<std::pair<const char*, CheckResult>> suites = {
        {"kav2", kav2(m, o)}, {"kav3", kav3(m, o)}, {"hp9", hp9(m, o)},
        {"order", order_preservation(m, o)}, {"spread", spread_bound(m, o)}};
    for (const auto& [name, r] : suites) {
      checked += r.checked;
      if (!r.ok || r.checked < 500) {
        ok = false;
        failures += " " + m.id() + "/" + name;
      }
    }
  }
  return {ok, std::to_string(models.size()) + " models, " + std::to_string(checked) + " samples" +
                  (failures.empty() ? std::string() : ", failed:" + failures)};
}

Outcome simple_eigenvalue() {
  Rng rng(5);
  Worst fd;
  double min_gap = INFINITY;
  bool simple = true;
  for (std::size_t d : {2u, 5u, 10u}) {
    for (int t = 0; t < 100; ++t) {
      const Dist p = testing::random_dist(rng, d, 0.05);
      std::uniform_real_distribution<double> ue(0.5, 2.0);
      const double eps = ue(rng);
      const SimpleEvReport r = simpleev_report(p, eps);
      simple = simple && r.simple_zero;
      min_gap = std::min(min_gap, r.gap);

      // Independent check: G(V) = -eps ln sum_j p_j exp(-V_j / eps) is the
      // entropy G of the row whose softmax at V = 0 is p; central second
      // differences of it against J.
      const Mat J = entropy_value_hessian(p, eps);
      auto G = [&](const Vec& V) {
        const Vec z = (-V / eps).array() + p.vec().array().log();
        const double mx = z.maxCoeff();
        return -eps * (mx + std::log((z.array() - mx).exp().sum()));
      };
      const auto n = static_cast<Eigen::Index>(d);
      const double h = 1e-3 * eps;
      double err = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        for (Eigen::Index l = 0; l < n; ++l) {
          const Vec a = Vec::Unit(n, k) * h, b = Vec::Unit(n, l) * h;
          const double est = (G(a + b) - G(a - b) - G(b - a) + G(-a - b)) / (4 * h * h);
          err = std::max(err, std::abs(est - J(k, l)));
        }
      }
      fd.below(err, 1e-5);
    }
  }
  return {simple && min_gap > 1e-8 && fd.ok, "300 points, min gap " + fmt("%.2e", min_gap) +
                                                 ", max fd error " + fmt("%.2e", fd.value)};
}

Outcome large_epsilon() {
  const std::vector<double> grid{0.1, 0.3, 1, 3, 10, 30, 100, 300};
  const auto make = [](double eps) { return *congestion(eps).entropy(); };
  const ContractionScan scan = scan_contraction(make, grid);
  if (!scan.threshold) return {false, "no contracting epsilon on the grid"};
  bool ok = true;
  double worst_norm = 0.0, worst_spread = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid[k] < *scan.threshold) continue;
    worst_norm = std::max(worst_norm, scan.norms[k]);
    ok = ok && scan.norms[k] < 1.0;

    // Undamped iteration of the mean-subtracted pair; one step of T^2 per
    // ratio, ignoring residuals at round-off level.
    StationaryOptions o;
    o.omega = 1.0;
    o.adaptive = false;
    o.tol = 1e-13;
    const StationarySolution s = stationary_generic(congestion(grid[k]), o);
    std::vector<double> ratios;
    for (std::size_t i = 0; i + 2 < s.history.size(); ++i) {
      if (s.history[i + 2] > 1e-11) ratios.push_back(s.history[i + 2] / s.history[i]);
    }
    if (ratios.size() < 3) {
      ok = false;
      continue;
    }
    std::vector<double> sorted = ratios;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    for (double r : ratios) {
      ok = ok && r < 1.0;
      worst_spread = std::max(worst_spread, std::abs(r - median) / median);
    }
  }
  ok = ok && worst_spread <= 0.2;
  return {ok, "threshold eps = " + fmt("%g", *scan.threshold) + ", max norm_T2 above it " +
                  fmt("%.3f", worst_norm) + ", max ratio deviation " + fmt("%.1f%%", 100 * worst_spread)};
}

Outcome uniqueness() {
  Rng rng(14);
  const CostModel m =
      monotone_w_model(quadratic_monotone_spec(testing::random_mat(rng, 3, 0, 2), 2.0, 1.0));
  std::vector<StationarySolution> sols;
  for (int k = 0; k < 5; ++k) {
    StationaryOptions o;
    o.initial_pi = testing::random_dist(rng, 3);
    o.initial_V = ValueVec(testing::random_vec(rng, 3, -5, 5));
    sols.push_back(stationary_generic(m, o));
  }
  Worst st;
  for (std::size_t k = 1; k < sols.size(); ++k) {
    st.below((sols[0].pi_bar.vec() - sols[k].pi_bar.vec()).norm(), 1e-6);
    const Vec dv = sols[0].V_bar.rep().vec() - sols[k].V_bar.rep().vec();
    st.below(0.5 * (dv.maxCoeff() - dv.minCoeff()), 1e-6);
  }

  Worst hz;
  const std::size_t N = 12;
  for (int trial = 0; trial < 3; ++trial) {
    const Dist pi0 = testing::random_dist(rng, 3);
    const ValueVec VN(testing::random_vec(rng, 3, -2, 2));
    HorizonOptions a;
    HorizonOptions b;
    b.guess = InitialGuess::explicit_guess;
    for (std::size_t n = 0; n <= N; ++n) b.guess_sequence.push_back(testing::random_dist(rng, 3));
    const Trajectory ta = solve_initial_terminal(pi0, VN, N, m, a);
    const Trajectory tb = solve_initial_terminal(pi0, VN, N, m, b);
    for (std::size_t n = 0; n <= N; ++n) {
      hz.below((ta.pis[n].vec() - tb.pis[n].vec()).cwiseAbs().maxCoeff(), 1e-6);
      hz.below((ta.Vs[n].vec() - tb.Vs[n].vec()).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
  return {st.ok && hz.ok, "stationary spread " + fmt("%.2e", st.value) + ", horizon guess gap " +
                              fmt("%.2e", hz.value)};
}

Outcome turnpike() {
  const CostModel m = congestion(1.0);
  StationaryOptions so;
  so.tol = 1e-15;
  so.perron_tol = 1e-15;
  const StationarySolution s = stationary_entropy(*m.entropy(), so);
  Vec p0(3), vt(3);
  p0 << 0.8, 0.15, 0.05;
  vt << 3, -1, 0;
  std::vector<std::size_t> Ns;
  for (std::size_t N = 2; N <= 20; ++N) Ns.push_back(N);

  SampleOptions diag;
  diag.n_samples = 1000;
  const AssumptionReport rep = assess(m, diag);
  TurnpikeOptions o;
  o.horizon.tol = 1e-14;
  o.C_est = turnpike_constant(rep);
  const TurnpikeReport r = turnpike_sweep(m, Dist(p0), ValueVec(vt), Ns, s, o);
  const bool fit_ok = r.fit && r.fit->slope < 0 && r.fit->r_squared > 0.95;

  Rng rng(8);
  const double K = estimate_K_hp11(m, 1000, 0);
  bool bound_ok = true;
  for (int t = 0; t < 10; ++t) {
    const std::size_t N = 2 * static_cast<std::size_t>(2 + t % 5);
    const Trajectory a = solve_initial_terminal(testing::random_dist(rng, 3),
                                                ValueVec(testing::random_vec(rng, 3, -2, 2)), N, m);
    const Trajectory b = solve_initial_terminal(testing::random_dist(rng, 3),
                                                ValueVec(testing::random_vec(rng, 3, -2, 2)), N, m);
    // |V~^0 - V^0| <= |V~^{2M} - V^{2M}| + 2M K, sup norms written out.
    const double lhs = (a.Vs[0].vec() - b.Vs[0].vec()).cwiseAbs().maxCoeff();
    const double rhs = (a.Vs[N].vec() - b.Vs[N].vec()).cwiseAbs().maxCoeff() + static_cast<double>(N) * K;
    bound_ok = bound_ok && lhs <= rhs * (1 + 1e-12);
  }
  return {fit_ok && r.numeros_ok && bound_ok,
          (r.fit ? "slope " + fmt("%.4f", r.fit->slope) + ", R^2 " + fmt("%.6f", r.fit->r_squared)
                 : std::string("no fit")) +
              ", C_est " + fmt("%.4g", r.C_est) + ", numeros " + (r.numeros_ok ? "ok" : "failed") +
              ", value bound " + (bound_ok ? "ok" : "failed") + " (K " + fmt("%g", K) + ")"};
}

Outcome variational() {
  Rng rng(21);
  Worst obj, res, agree;
  for (int t = 0; t < 3; ++t) {
    const Mat tilde = testing::random_mat(rng, 2, 0, 2);
    const double alpha = 1.0 + t, eps = 1.0;
    // Holonomy forces eta_12 = eta_21 = c, so eta = [[x, c], [c, 1 - x - 2c]].
    auto objective = [&](double x, double c) {
      const double y = 1 - x - 2 * c;
      const double p1 = x + c, p2 = y + c;
      auto term = [&](double e, double p, double tc) { return e > 0 ? e * (tc + eps * std::log(e / p)) : 0.0; };
      return term(x, p1, tilde(0, 0)) + term(c, p1, tilde(0, 1)) + term(c, p2, tilde(1, 0)) +
             term(y, p2, tilde(1, 1)) + 0.5 * alpha * (p1 * p1 + p2 * p2);
    };
    double best = INFINITY;
    for (int i = 0; i <= 1000; ++i) {
      for (int j = 0; 2 * j + i <= 1000; ++j) best = std::min(best, objective(i * 1e-3, j * 1e-3));
    }
    const VariationalResult r =
        variational_solve(quadratic_objective(alpha), entropy_model(entropy_table_spec(tilde, eps)));
    obj.below(std::abs(r.objective - best), 1e-3);

    const CostModel game = monotone_w_model(quadratic_monotone_spec(tilde, alpha, eps));
    const auto sr = stationary_residuals(r.pi_eta, r.induced.V_bar.rep(), r.induced.lambda_bar, game);
    res.below(std::max({sr.value, sr.lambda, sr.dist}), 1e-6);
    const StationarySolution s = stationary_generic(game);
    agree.below((r.pi_eta.vec() - s.pi_bar.vec()).cwiseAbs().maxCoeff(), 1e-6);
    agree.below(std::abs(r.induced.lambda_bar - s.lambda_bar), 1e-6);
  }
  return {obj.ok && res.ok && agree.ok, "objective gap to grid " + fmt("%.2e", obj.value) +
                                            ", stationary residual " + fmt("%.2e", res.value) +
                                            ", gap to stationary_generic " + fmt("%.2e", agree.value)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const fs::path root = fs::temp_directory_path() / "dmfg_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cong = root / "congestion.json";
  std::ofstream(cong) << R"({"d": 3, "epsilon": 1,
    "model": {"type": "congestion", "a": [[0.2, 0.9, 0.5], [0.7, 0.1, 0.4], [0.3, 0.8, 0.6]], "b": [1, 1.5, 2]},
    "horizon": {"N": 8, "Ns": [2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]},
    "initial_pi": [0.8, 0.15, 0.05], "terminal_V": [3, -1, 0],
    "diagnostics": {"samples": 300}, "seed": 42})";
  const fs::path mono = root / "monotone.json";
  std::ofstream(mono) << R"({"d": 3, "epsilon": 1,
    "model": {"type": "monotone_w", "tilde_c": [[0.2, 0.9, 0.5], [0.7, 0.1, 0.4], [0.3, 0.8, 0.6]], "alpha": 1},
    "seed": 42})";

  const std::vector<std::pair<std::string, fs::path>> runs = {
      {"stationary", cong}, {"evolve", cong}, {"turnpike", cong}, {"check", cong}, {"variational", mono}};
  bool ok = true;
  std::size_t files = 0;
  std::string bad;
  for (const auto& [cmd, cfg] : runs) {
    for (const char* rep : {"a", "b"}) {
      // Different worker counts on the two runs; output must not change.
      const std::string threads = rep[0] == 'a' ? "1" : "3";
      const std::string line = "DMFG_THREADS=" + threads + " \"" + DMFG_TOOL + "\" " + cmd + " --config \"" +
                               cfg.string() + "\" --out \"" + (root / rep / cmd).string() +
                               "\" --seed 7 --quiet";
      if (std::system(line.c_str()) != 0) {
        ok = false;
        bad += " " + cmd + "(exit)";
      }
    }
    if (!fs::exists(root / "a" / cmd)) continue;
    std::size_t here = 0;
    for (const auto& e : fs::directory_iterator(root / "a" / cmd)) {
      const fs::path other = root / "b" / cmd / e.path().filename();
      ++here;
      if (!fs::exists(other) || slurp(e.path()) != slurp(other)) {
        ok = false;
        bad += " " + cmd + "/" + e.path().filename().string();
      }
    }
    if (here < 2) ok = false;
    files += here;
  }
  fs::remove_all(root);
  return {ok, std::to_string(runs.size()) + " subcommands, " + std::to_string(files) + " files compared" +
                  (bad.empty() ? std::string() : ", differing:" + bad)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"theta non-uniqueness family", theta_family},
      {"entropy symmetric closed forms", entropy_symmetric},
      {"closed-form Nash vs simplex grid", closed_form_oracle},
      {"eigenpair conjugation and representation formula", eigen_conjugation},
      {"inequality suites on separable models", inequality_suites},
      {"simple zero eigenvalue of J", simple_eigenvalue},
      {"large-epsilon contraction", large_epsilon},
      {"uniqueness of stationary and finite-horizon solutions", uniqueness},
      {"turnpike decay and decay lemma", turnpike},
      {"variational cross-check", variational},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [name, run] : criteria) {
    Outcome o{false, ""};
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %-54s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%zu criteria, %d failed, %.1f s\n", criteria.size(), failed, secs);
  return failed == 0 ? 0 : 1;
}
