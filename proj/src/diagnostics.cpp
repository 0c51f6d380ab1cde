#include "dmfg/diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dmfg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSkip = 1e-8;

class Sampler {
 public:
  Sampler(const CostModel& model, const SampleOptions& opts)
      : rng_(opts.seed), d_(static_cast<Eigen::Index>(model.dim())),
        box_(opts.box_scale * model.cost_scale()) {}

  /// Dirichlet(1) as normalized exponentials: exactly d draws per call.
  Vec pi() {
    std::exponential_distribution<double> e(1.0);
    Vec w(d_);
    for (Eigen::Index k = 0; k < d_; ++k) w(k) = e(rng_);
    return w / w.sum();
  }
  /// Interior point: mixed with the uniform vector so no entry vanishes.
  Vec interior() { return 0.9 * pi() + Vec::Constant(d_, 0.1 / static_cast<double>(d_)); }
  Vec V() {
    std::uniform_real_distribution<double> u(-box_, box_);
    Vec v(d_);
    for (Eigen::Index k = 0; k < d_; ++k) v(k) = u(rng_);
    return v;
  }
  Vec nonneg(double hi) {
    std::uniform_real_distribution<double> u(0.0, hi);
    Vec v(d_);
    for (Eigen::Index k = 0; k < d_; ++k) v(k) = u(rng_);
    return v;
  }
  Mat stoch(bool interior_rows) {
    Mat P(d_, d_);
    for (Eigen::Index i = 0; i < d_; ++i) P.row(i) = (interior_rows ? interior() : pi()).transpose();
    return P;
  }
  double box() const { return box_; }

 private:
  std::mt19937_64 rng_;
  Eigen::Index d_;
  double box_;
};

Vec centered(const Vec& v) { return (v.array() - v.mean()).matrix(); }

double sq_sharp(const Vec& v, NormKind kind) {
  const double s = sharp_norm(v, kind);
  return s * s;
}

Vec G_of(const CostModel& m, const Vec& pi, const Vec& V, const NashOptions& nash) {
  return apply_G(Dist(pi), ValueVec(V), m, nash).vec();
}

void note_violation(CheckResult& r, double excess, const char* name, std::vector<Vec> pis,
                    std::vector<Vec> Vs) {
  ++r.checked;
  if (excess > r.worst_excess || r.checked == 1) {
    r.worst_excess = excess;
    r.worst = WorstCase{name, excess, std::move(pis), std::move(Vs)};
  }
}

/// sum_j |c_ij(pi, P) - c_i'j(pi, rho_{i,i'}(P))| P_ij.
double hp6_term(const CostModel& m, const Vec& pi, const StochMatrix& P, std::size_t i,
                std::size_t ip) {
  const Mat rho = P.row_replaced(i, ip).mat();
  double s = 0.0;
  for (std::size_t j = 0; j < m.dim(); ++j) {
    const double p = P(i, j);
    if (p == 0.0) continue;
    s += std::abs(m.eval(pi, P.mat(), i, j) - m.eval(pi, rho, ip, j)) * p;
  }
  return s;
}

/// g_ij = de_i/dP_ij up to terms that cancel in the diagonal-convexity sum.
Mat row_gradients(const CostModel& m, const Vec& pi, const Mat& P, const Vec& V) {
  const auto d = P.rows();
  Mat g(d, d);
  if (m.has_marginal() || m.flags().pi_only) {
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) {
        const auto ii = static_cast<std::size_t>(i), jj = static_cast<std::size_t>(j);
        g(i, j) = (m.has_marginal() ? m.marginal(pi, P, ii, jj) : m.eval(pi, P, ii, jj)) + V(j);
      }
    return g;
  }
  constexpr double h = 1e-6;
  auto e_row = [&](const Mat& Q, Eigen::Index i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      s += Q(i, j) * (m.eval(pi, Q, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) + V(j));
    }
    return s;
  };
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Mat qp = P, qm = P;
      qp(i, j) += h;
      qm(i, j) -= h;
      g(i, j) = (e_row(qp, i) - e_row(qm, i)) / (2 * h);
    }
    // Re-project the row onto the simplex tangent.
    g.row(i).array() -= g.row(i).mean();
  }
  return g;
}

}  // namespace

GammaEstimate gamma_hp8(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  GammaEstimate est;
  est.raw_infimum = kInf;
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), pt = s.pi(), V = s.V(), Vt = s.V();
    const double dist2 = (p - pt).squaredNorm();
    if (std::sqrt(dist2) < kSkip) continue;
    const double lhs = pt.dot(G_of(model, pt, V, opts.nash) - G_of(model, p, V, opts.nash)) +
                       p.dot(G_of(model, p, Vt, opts.nash) - G_of(model, pt, Vt, opts.nash));
    const double ratio = lhs / dist2;
    ++est.used;
    if (ratio < est.raw_infimum) {
      est.raw_infimum = ratio;
      est.worst = WorstCase{"hp8", ratio, {p, pt}, {V, Vt}};
    }
  }
  if (est.used == 0) est.raw_infimum = 0.0;
  est.failed = !(est.raw_infimum > 0.0);
  est.gamma = est.failed ? 0.0 : est.raw_infimum;
  return est;
}

GammaEstimate gamma_hp10(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  GammaEstimate est;
  est.raw_infimum = kInf;
  bool positive_lhs = false;
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V1 = centered(s.V()), V2 = centered(s.V());
    const double dist2 = sq_sharp(V1 - V2, opts.value_norm);
    if (std::sqrt(dist2) < kSkip) continue;
    const StepResult st = evolve_step(Dist(p), ValueVec(V1), model, opts.nash);
    const Vec G2 = G_of(model, p, V2, opts.nash);
    const double lhs = p.dot(G2 - st.G.vec()) + st.K.vec().dot(V1 - V2);
    if (lhs > opts.slack) positive_lhs = true;
    const double ratio = -lhs / dist2;
    ++est.used;
    if (ratio < est.raw_infimum) {
      est.raw_infimum = ratio;
      est.worst = WorstCase{"hp10", ratio, {p}, {V1, V2}};
    }
  }
  if (est.used == 0) est.raw_infimum = 0.0;
  est.failed = positive_lhs || !(est.raw_infimum > 0.0);
  est.gamma = est.failed ? 0.0 : est.raw_infimum;
  return est;
}

CheckResult hp9(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  CheckResult r;
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V1 = s.V();
    Vec V2 = s.V();
    // Every tenth sample is a pure constant shift, where every index is extremal.
    if (k % 10 == 9) V2 = (V1.array() + V2(0)).matrix();
    const Vec D = V1 - V2;
    const Vec a = G_of(model, p, V1, opts.nash) - V1;
    const Vec b = G_of(model, p, V2, opts.nash) - V2;
    const double tie = 1e-12 * (1.0 + D.cwiseAbs().maxCoeff());
    double excess = -kInf;
    for (Eigen::Index i = 0; i < D.size(); ++i) {
      if (D(i) >= D.maxCoeff() - tie) excess = std::max(excess, a(i) - b(i));
      if (D(i) <= D.minCoeff() + tie) excess = std::max(excess, b(i) - a(i));
    }
    note_violation(r, excess, "hp9", {p}, {V1, V2});
    if (excess > opts.slack) ++r.violations;
  }
  r.ok = r.violations == 0;
  return r;
}

CheckResult hp3(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  CheckResult r;
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V = s.V();
    const Mat P1 = s.stoch(true), P2 = s.stoch(true);
    if ((P1 - P2).cwiseAbs().maxCoeff() == 0.0) continue;
    const Mat g1 = row_gradients(model, p, P1, V);
    const Mat g2 = row_gradients(model, p, P2, V);
    const double sum = (P1 - P2).cwiseProduct(g1 - g2).sum();
    // Excess is how far the sum falls short of strict positivity.
    note_violation(r, 1e-12 - sum, "hp3", {p}, {V});
    if (!(sum > 1e-12)) ++r.violations;
  }
  r.ok = r.violations == 0 && r.checked > 0;
  return r;
}

SpreadEstimate spread_C(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  SpreadEstimate est;
  const std::size_t d = model.dim();
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V = s.V();
    const StochMatrix random_P(s.stoch(false));
    const StepResult st = evolve_step(Dist(p), ValueVec(V), model, opts.nash);
    const double spread = st.G.vec().maxCoeff() - st.G.vec().minCoeff();
    if (spread > est.C_spread) {
      est.C_spread = spread;
      est.worst = WorstCase{"spread", spread, {p}, {V}};
    }
    for (const StochMatrix* P : {&random_P, &st.nash.P}) {
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t ip = 0; ip < d; ++ip) {
          if (i != ip) est.C_hp6 = std::max(est.C_hp6, hp6_term(model, p, *P, i, ip));
        }
    }
  }
  return est;
}

KEstimate K_hp11(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  KEstimate est;
  const auto d = static_cast<Eigen::Index>(model.dim());
  auto visit = [&](const Vec& p, const Vec& pt, const Mat& P) {
    for (std::size_t i = 0; i < model.dim(); ++i)
      for (std::size_t j = 0; j < model.dim(); ++j) {
        const double osc = std::abs(model.eval(p, P, i, j) - model.eval(pt, P, i, j));
        if (osc > est.K) {
          est.K = osc;
          est.worst = WorstCase{"hp11", osc, {p, pt}, {}};
        }
      }
  };
  // Vertex pairs first: for costs monotone in each pi_k the extremes sit there.
  std::size_t used = 0;
  for (Eigen::Index a = 0; a < d && used < opts.n_samples; ++a)
    for (Eigen::Index b = 0; b < d && used < opts.n_samples; ++b) {
      if (a == b) continue;
      visit(Vec::Unit(d, a), Vec::Unit(d, b), s.stoch(true));
      ++used;
    }
  for (; used < opts.n_samples; ++used) visit(s.pi(), s.pi(), s.stoch(true));
  return est;
}

CheckResult kav2(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  CheckResult r;
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V1 = s.V(), V2 = s.V();
    const StepResult st = evolve_step(Dist(p), ValueVec(V1), model, opts.nash);
    const Vec bound = st.G.vec() + st.nash.P.mat() * (V2 - V1);
    const double excess = (G_of(model, p, V2, opts.nash) - bound).maxCoeff();
    note_violation(r, excess, "kav2", {p}, {V1, V2});
    if (excess > opts.slack) ++r.violations;
  }
  r.ok = r.violations == 0;
  return r;
}

CheckResult kav3(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  CheckResult r;
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V1 = s.V(), V2 = s.V();
    const StepResult st = evolve_step(Dist(p), ValueVec(V1), model, opts.nash);
    const double excess =
        p.dot(G_of(model, p, V2, opts.nash) - st.G.vec()) - (V2 - V1).dot(st.K.vec());
    note_violation(r, excess, "kav3", {p}, {V1, V2});
    if (excess > opts.slack) ++r.violations;
  }
  r.ok = r.violations == 0;
  return r;
}

CheckResult order_preservation(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  CheckResult r;
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V1 = s.V();
    const Vec V2 = V1 + s.nonneg(s.box());
    const StepResult st = evolve_step(Dist(p), ValueVec(V1), model, opts.nash);
    const Vec diff = G_of(model, p, V2, opts.nash) - st.G.vec();
    const double excess =
        std::max(-diff.minCoeff(), (diff - st.nash.P.mat() * (V2 - V1)).maxCoeff());
    note_violation(r, excess, "order", {p}, {V1, V2});
    if (excess > opts.slack) ++r.violations;
  }
  r.ok = r.violations == 0;
  return r;
}

CheckResult spread_bound(const CostModel& model, const SampleOptions& opts) {
  Sampler s(model, opts);
  CheckResult r;
  const std::size_t d = model.dim();
  for (std::size_t k = 0; k < opts.n_samples; ++k) {
    const Vec p = s.pi(), V = s.V();
    const StepResult st = evolve_step(Dist(p), ValueVec(V), model, opts.nash);
    double excess = -kInf;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t ip = i + 1; ip < d; ++ip) {
        const double bound = std::max(hp6_term(model, p, st.nash.P, i, ip),
                                      hp6_term(model, p, st.nash.P, ip, i));
        excess = std::max(excess, std::abs(st.G[i] - st.G[ip]) - bound);
      }
    note_violation(r, excess, "spread", {p}, {V});
    if (excess > opts.slack) ++r.violations;
  }
  r.ok = r.violations == 0;
  return r;
}

double estimate_gamma_hp8(const CostModel& model, std::size_t n, std::uint64_t seed) {
  SampleOptions o;
  o.n_samples = n;
  o.seed = seed;
  return gamma_hp8(model, o).gamma;
}

double estimate_gamma_hp10(const CostModel& model, std::size_t n, std::uint64_t seed) {
  SampleOptions o;
  o.n_samples = n;
  o.seed = seed;
  return gamma_hp10(model, o).gamma;
}

bool check_hp9(const CostModel& model, std::size_t n, std::uint64_t seed) {
  SampleOptions o;
  o.n_samples = n;
  o.seed = seed;
  return hp9(model, o).ok;
}

bool check_hp3(const CostModel& model, std::size_t n, std::uint64_t seed) {
  SampleOptions o;
  o.n_samples = n;
  o.seed = seed;
  return hp3(model, o).ok;
}

double estimate_spread_C(const CostModel& model, std::size_t n, std::uint64_t seed) {
  SampleOptions o;
  o.n_samples = n;
  o.seed = seed;
  return spread_C(model, o).C_spread;
}

double estimate_K_hp11(const CostModel& model, std::size_t n, std::uint64_t seed) {
  SampleOptions o;
  o.n_samples = n;
  o.seed = seed;
  return K_hp11(model, o).K;
}

Mat entropy_value_hessian(const Dist& p, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("entropy_value_hessian: epsilon must be positive");
  const Vec& v = p.vec();
  Mat J = v * v.transpose();
  J.diagonal() -= v;
  return J / epsilon;
}

SimpleEvReport simpleev_report(const Dist& p, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("check_jacobian_simpleev: epsilon must be positive");
  if (p.vec().minCoeff() <= 1e-9 || p.vec().maxCoeff() >= 1.0 - 1e-9) {
    throw PreconditionError("check_jacobian_simpleev: p must lie in the open simplex");
  }
  const Mat J = entropy_value_hessian(p, epsilon);
  Eigen::SelfAdjointEigenSolver<Mat> es(J, Eigen::EigenvaluesOnly);
  const Vec mu = es.eigenvalues();
  std::size_t zeros = 0;
  double gap = kInf;
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    if (std::abs(mu(k)) <= 1e-12) {
      ++zeros;
    } else {
      gap = std::min(gap, std::abs(mu(k)));
    }
  }

  // Entropy G row with base chosen so that its softmax at V = 0 equals p.
  const auto d = static_cast<Eigen::Index>(p.size());
  const Mat base = (-epsilon * p.vec().array().log()).matrix().transpose();
  auto G = [&](const Vec& V) { return detail::soft_min_rows(base, V, epsilon)(0); };
  const double h = 1e-3 * epsilon;
  Mat fd(d, d);
  const Vec zero = Vec::Zero(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    for (Eigen::Index l = 0; l < d; ++l) {
      if (k == l) {
        const Vec e = Vec::Unit(d, k) * h;
        fd(k, l) = (G(e) - 2.0 * G(zero) + G(-e)) / (h * h);
      } else {
        const Vec a = Vec::Unit(d, k) * h, b = Vec::Unit(d, l) * h;
        fd(k, l) = (G(a + b) - G(a - b) - G(b - a) + G(-a - b)) / (4.0 * h * h);
      }
    }
  }
  const double fd_error = (fd - J).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, J.cwiseAbs().maxCoeff());
  return SimpleEvReport{zeros == 1, gap, mu, fd_error, fd_error <= 1e-5 * scale};
}

bool check_jacobian_simpleev(const Dist& p, double epsilon) {
  const SimpleEvReport r = simpleev_report(p, epsilon);
  return r.simple_zero && r.fd_ok;
}

AssumptionReport assess(const CostModel& model, const SampleOptions& opts) {
  AssumptionReport r;
  r.model_id = model.id();
  r.samples = opts.n_samples;
  r.seed = opts.seed;
  const GammaEstimate g8 = gamma_hp8(model, opts);
  const GammaEstimate g10 = gamma_hp10(model, opts);
  const SpreadEstimate sp = spread_C(model, opts);
  const KEstimate K = K_hp11(model, opts);
  const CheckResult c3 = hp3(model, opts);
  const CheckResult c9 = hp9(model, opts);
  const CheckResult k2 = kav2(model, opts);
  const CheckResult k3 = kav3(model, opts);
  const CheckResult op = order_preservation(model, opts);
  const CheckResult sb = spread_bound(model, opts);
  r.gamma_hp8 = g8.gamma;
  r.hp8_failed = g8.failed;
  r.gamma_hp10 = g10.gamma;
  r.hp10_failed = g10.failed;
  r.C_spread = sp.C_spread;
  r.C_hp6 = sp.C_hp6;
  r.K_hp11 = K.K;
  r.hp3_ok = c3.ok;
  r.hp9_ok = c9.ok;
  r.kav_ok = k2.ok && k3.ok && op.ok;
  r.spread_bound_ok = sb.ok;
  r.worst_cases = {g8.worst, g10.worst, sp.worst, K.worst, c3.worst, c9.worst,
                   k2.worst, k3.worst, op.worst, sb.worst};
  return r;
}

double turnpike_constant(const AssumptionReport& r) {
  const double g = std::min(r.gamma_hp8, r.gamma_hp10);
  return g > 0.0 ? 1.0 / g : kInf;
}

}  // namespace dmfg
