#include "dmfg/stationary.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

namespace dmfg {

namespace {

constexpr double kProbeStep = 1e-6;

Vec centered(const Vec& v) { return (v.array() - v.mean()).matrix(); }

std::string fmt_residual(double r) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", r);
  return buf;
}

/// Largest singular value by power iteration on M M^T.
double top_singular_value(const Mat& M) {
  if (M.size() == 0) return 0.0;
  const Mat A = M * M.transpose();
  Vec v = Vec::LinSpaced(A.rows(), 1.0, 2.0);
  v.normalize();
  double mu = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vec w = A * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    w /= n;
    const double mu_new = w.dot(A * w);
    const bool done = std::abs(mu_new - mu) <= 1e-14 * std::max(1.0, std::abs(mu_new));
    v = w;
    mu = mu_new;
    if (done) break;
  }
  return std::sqrt(std::max(mu, 0.0));
}

/// Orthonormal basis of the zero-sum subspace of R^d, as columns.
Mat zero_sum_basis(Eigen::Index d) {
  Mat B(d, d - 1);
  for (Eigen::Index k = 0; k < d - 1; ++k) {
    B.col(k) = Vec::Constant(d, -1.0 / static_cast<double>(d));
    B(k, k) += 1.0;
  }
  Eigen::HouseholderQR<Mat> qr(B);
  return qr.householderQ() * Mat::Identity(d, d - 1);
}

struct HattedMap {
  const EntropyCostSpec& spec;

  Vec G(const Vec& V, const Vec& pi) const {
    return detail::soft_min_rows(spec.base(pi), V, spec.epsilon);
  }
  Vec K(const Vec& V, const Vec& pi) const {
    return detail::softmax_rows(spec.base(pi), V, spec.epsilon).transpose() * pi;
  }
  Vec G_hat(const Vec& V, const Vec& pi) const { return centered(G(V, pi)); }
  Vec K_hat(const Vec& V, const Vec& pi) const {
    Vec k = K(V, pi);
    return (k.array() - (k.sum() - 1.0) / static_cast<double>(k.size())).matrix();
  }
};

/// Coordinate-axis partials of (G, K) or (G^, K^) at (V, pi).
std::array<Mat, 4> coordinate_blocks(const HattedMap& T, const Vec& V, const Vec& pi,
                                     bool hatted) {
  const auto d = V.size();
  std::array<Mat, 4> blocks{Mat(d, d), Mat(d, d), Mat(d, d), Mat(d, d)};
  auto eval = [&](const Vec& v, const Vec& p) {
    return hatted ? std::pair<Vec, Vec>{T.G_hat(v, p), T.K_hat(v, p)}
                  : std::pair<Vec, Vec>{T.G(v, p), T.K(v, p)};
  };
  const double h = kProbeStep;
  for (Eigen::Index j = 0; j < d; ++j) {
    Vec vp = V, vm = V;
    vp(j) += h;
    vm(j) -= h;
    auto [gp, kp] = eval(vp, pi);
    auto [gm, km] = eval(vm, pi);
    blocks[0].col(j) = (gp - gm) / (2 * h);
    blocks[2].col(j) = (kp - km) / (2 * h);
    Vec pp = pi, pm = pi;
    pp(j) += h;
    pm(j) -= h;
    auto [gp2, kp2] = eval(V, pp);
    auto [gm2, km2] = eval(V, pm);
    blocks[1].col(j) = (gp2 - gm2) / (2 * h);
    blocks[3].col(j) = (kp2 - km2) / (2 * h);
  }
  return blocks;
}

/// DT of the hatted map in the basis Q x Q of the mean-zero x zero-sum subspaces.
Mat restricted_jacobian(const HattedMap& T, const Mat& Q, const Vec& V, const Vec& pi) {
  const auto m = Q.cols();
  Mat J(2 * m, 2 * m);
  const double h = kProbeStep;
  for (Eigen::Index c = 0; c < 2 * m; ++c) {
    const Vec u = Q.col(c % m);
    Vec vp = V, vm = V, pp = pi, pm = pi;
    if (c < m) {
      vp += h * u;
      vm -= h * u;
    } else {
      pp += h * u;
      pm -= h * u;
    }
    const Vec dG = (T.G_hat(vp, pp) - T.G_hat(vm, pm)) / (2 * h);
    const Vec dK = (T.K_hat(vp, pp) - T.K_hat(vm, pm)) / (2 * h);
    J.col(c).head(m) = Q.transpose() * dG;
    J.col(c).tail(m) = Q.transpose() * dK;
  }
  return J;
}

}  // namespace

Relaxation::Relaxation(double omega, double floor, bool adaptive)
    : omega_(omega), floor_(floor), adaptive_(adaptive),
      previous_(std::numeric_limits<double>::infinity()) {
  if (!(omega > 0.0 && omega <= 1.0)) throw InvalidInput("relaxation weight must be in (0, 1]");
  if (!(floor > 0.0)) throw InvalidInput("relaxation floor must be positive");
}

void Relaxation::observe(double residual) {
  if (adaptive_ && residual > previous_) omega_ = std::max(omega_ / 2.0, floor_);
  previous_ = residual;
}

StationaryResiduals stationary_residuals(const Dist& pi, const ValueVec& V, double lambda,
                                         const CostModel& model, NormKind value_norm,
                                         const NashOptions& nash) {
  require_same_size(pi.size(), model.dim(), "stationary_residuals: pi");
  require_same_size(V.size(), model.dim(), "stationary_residuals: V");
  StepResult step = evolve_step(pi, V, model, nash);
  const Vec gap = step.G.vec() - V.vec();
  return StationaryResiduals{sharp_norm(gap, value_norm), std::abs(gap.mean() - lambda),
                             (step.K.vec() - pi.vec()).norm(), std::move(step.nash.P)};
}

PerronResult perron_eigen(const Dist& pi, const EntropyCostSpec& spec, const PerronOptions& opts) {
  spec.validate();
  require_same_size(pi.size(), spec.d, "perron_eigen: pi");
  const Mat base = spec.base(pi.vec());
  require_finite(Eigen::Map<const Vec>(base.data(), base.size()), "perron_eigen: base costs");
  const double eps = spec.epsilon;
  const double cmin = base.minCoeff();
  const Mat A = (-(base.array() - cmin) / eps).exp().matrix();

  const auto d = static_cast<Eigen::Index>(spec.d);
  Vec psi = Vec::Constant(d, 1.0 / static_cast<double>(d));
  double mu = 0.0;
  std::vector<double> history;
  int it = 0;
  for (;; ++it) {
    if (it >= opts.max_iter) {
      throw NonConvergence("perron_eigen: power iteration cap reached", std::move(history));
    }
    const Vec y = A * psi;
    mu = y.sum();
    const Vec next = y / mu;
    const double diff = (next - psi).cwiseAbs().maxCoeff();
    psi = next;
    history.push_back(diff);
    if (diff <= opts.tol) break;
  }
  const Vec Apsi = A * psi;
  mu = Apsi.sum();
  const double eig_res = (Apsi - mu * psi).cwiseAbs().maxCoeff() / (mu * psi).cwiseAbs().maxCoeff();
  const double lambda = cmin - eps * std::log(mu);
  Vec V = -eps * psi.array().log();
  return PerronResult{std::exp(-lambda / eps), lambda, psi, ValueVec(centered(V)), it + 1,
                      eig_res};
}

StationarySolution stationary_entropy(const EntropyCostSpec& spec, const StationaryOptions& opts) {
  spec.validate();
  Vec pi = opts.initial_pi ? opts.initial_pi->vec() : Dist::uniform(spec.d).vec();
  require_same_size(static_cast<std::size_t>(pi.size()), spec.d, "stationary_entropy: initial pi");
  Relaxation relax(opts.omega, opts.omega_floor, opts.adaptive);
  std::vector<double> history;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Dist cur(pi);
    PerronResult pr = perron_eigen(cur, spec, PerronOptions{opts.perron_tol, 100000});
    const Mat P = detail::softmax_rows(spec.base(cur.vec()), pr.V_pi.vec(), spec.epsilon);
    const Vec K = P.transpose() * cur.vec();
    const double r = (K - cur.vec()).norm();
    history.push_back(r);
    if (r <= opts.tol) {
      const ValueVec G = entropy_G(cur, pr.V_pi, spec);
      const double rv = sharp_norm(Vec(G.vec() - pr.V_pi.vec()), opts.value_norm);
      return StationarySolution{cur,        ValueClass(pr.V_pi), pr.lambda_pi, StochMatrix(P),
                                rv,         r,                   it + 1,       std::move(history),
                                opts.value_norm};
    }
    relax.observe(r);
    pi = (1.0 - relax.omega()) * cur.vec() + relax.omega() * K;
  }
  const std::string msg = "stationary_entropy: iteration cap reached, residual " +
                          fmt_residual(history.empty() ? 0.0 : history.back());
  throw NonConvergence(msg, std::move(history));
}

StationarySolution stationary_generic(const CostModel& model, const StationaryOptions& opts) {
  const auto d = model.dim();
  Vec pi = opts.initial_pi ? opts.initial_pi->vec() : Dist::uniform(d).vec();
  Vec V = opts.initial_V ? centered(opts.initial_V->vec()) : Vec::Zero(static_cast<Eigen::Index>(d));
  require_same_size(static_cast<std::size_t>(pi.size()), d, "stationary_generic: initial pi");
  require_same_size(static_cast<std::size_t>(V.size()), d, "stationary_generic: initial V");
  Relaxation relax(opts.omega, opts.omega_floor, opts.adaptive);
  std::vector<double> history;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Dist cur(pi);
    const ValueVec val(V);
    StepResult step = evolve_step(cur, val, model, opts.nash);
    const Vec gap = step.G.vec() - V;
    const double rv = sharp_norm(gap, opts.value_norm);
    const double rd = (step.K.vec() - cur.vec()).norm();
    const double r = std::max(rv, rd);
    history.push_back(r);
    if (r <= opts.tol) {
      return StationarySolution{cur, ValueClass(val), gap.mean(), std::move(step.nash.P),
                                rv,  rd,              it + 1,     std::move(history),
                                opts.value_norm};
    }
    relax.observe(r);
    const double w = relax.omega();
    V = (1.0 - w) * V + w * centered(step.G.vec());
    pi = (1.0 - w) * cur.vec() + w * step.K.vec();
  }
  const std::string msg = "stationary_generic: iteration cap reached, residual " +
                          fmt_residual(history.empty() ? 0.0 : history.back());
  throw NonConvergence(msg, std::move(history));
}

double critical_value(const Dist& pi_bar, const StochMatrix& P_bar, const CostModel& model,
                      const ValueVec& V_bar, double stationarity_tol) {
  const auto d = model.dim();
  require_same_size(pi_bar.size(), d, "critical_value: pi");
  require_same_size(P_bar.size(), d, "critical_value: P");
  require_same_size(V_bar.size(), d, "critical_value: V");
  const double r = (P_bar.mat().transpose() * pi_bar.vec() - pi_bar.vec()).norm();
  if (r > stationarity_tol) {
    throw PreconditionError("critical_value: pi is not stationary under P (residual " +
                            fmt_residual(r) + ")");
  }
  double lambda = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < d; ++j) row += model.summand(pi_bar.vec(), P_bar.mat(), i, j);
    lambda += pi_bar[i] * row;
  }
  return lambda;
}

ValueSolution solve_value_at(const Dist& pi, const CostModel& model, const StationaryOptions& opts) {
  require_same_size(pi.size(), model.dim(), "solve_value_at: pi");
  if (const auto* spec = model.entropy()) {
    PerronResult pr = perron_eigen(pi, *spec, PerronOptions{opts.perron_tol, 100000});
    const ValueVec G = entropy_G(pi, pr.V_pi, *spec);
    const double r = sharp_norm(Vec(G.vec() - pr.V_pi.vec()), opts.value_norm);
    return ValueSolution{pr.V_pi, pr.lambda_pi, r, pr.iterations};
  }
  Vec V = opts.initial_V ? centered(opts.initial_V->vec())
                         : Vec::Zero(static_cast<Eigen::Index>(model.dim()));
  Relaxation relax(opts.omega, opts.omega_floor, opts.adaptive);
  std::vector<double> history;
  for (int it = 0; it < opts.max_iter; ++it) {
    const ValueVec val(V);
    const Vec G = apply_G(pi, val, model, opts.nash).vec();
    const double r = sharp_norm(Vec(G - V), opts.value_norm);
    history.push_back(r);
    if (r <= opts.tol) return ValueSolution{val, (G - V).mean(), r, it + 1};
    relax.observe(r);
    V = (1.0 - relax.omega()) * V + relax.omega() * centered(G);
  }
  throw NonConvergence("solve_value_at: iteration cap reached", std::move(history));
}

ContractionReport contraction_probe(const EntropyCostSpec& spec, const Dist& pi,
                                    const ValueVec& V) {
  spec.validate();
  require_same_size(pi.size(), spec.d, "contraction_probe: pi");
  require_same_size(V.size(), spec.d, "contraction_probe: V");
  const HattedMap T{spec};
  const Vec v0 = centered(V.vec());
  const Vec p0 = pi.vec();
  const Mat Q = zero_sum_basis(static_cast<Eigen::Index>(spec.d));

  const Mat J0 = restricted_jacobian(T, Q, v0, p0);
  const Vec v1 = T.G_hat(v0, p0);
  const Vec p1 = T.K_hat(v0, p0);
  const Mat J1 = restricted_jacobian(T, Q, v1, p1);
  const double n2 = top_singular_value(J1 * J0);

  ContractionReport rep{spec.epsilon,
                        coordinate_blocks(T, v0, p0, false),
                        coordinate_blocks(T, v0, p0, true),
                        n2,
                        top_singular_value(J0),
                        n2 < 1.0};
  return rep;
}

ContractionScan scan_contraction(const std::function<EntropyCostSpec(double)>& make_spec,
                                 const std::vector<double>& epsilons,
                                 const StationaryOptions& opts) {
  ContractionScan scan;
  scan.epsilons = epsilons;
  std::sort(scan.epsilons.begin(), scan.epsilons.end());
  for (double eps : scan.epsilons) {
    const EntropyCostSpec spec = make_spec(eps);
    const StationarySolution sol = stationary_entropy(spec, opts);
    scan.norms.push_back(contraction_probe(spec, sol.pi_bar, sol.V_bar.rep()).norm_T2);
  }
  for (std::size_t k = scan.epsilons.size(); k-- > 0;) {
    if (!(scan.norms[k] < 1.0)) break;
    scan.threshold = scan.epsilons[k];
  }
  return scan;
}

// --------------------------------------------------------------------------
// Variational program

namespace {

struct EdgeState {
  Vec pi;
  Mat P;
  std::vector<std::size_t> zero_rows;
};

constexpr double kZeroRow = 1e-14;

EdgeState split_edge_measure(const Mat& eta) {
  const auto d = eta.rows();
  EdgeState s{eta.rowwise().sum(), Mat(d, d), {}};
  for (Eigen::Index i = 0; i < d; ++i) {
    if (s.pi(i) <= kZeroRow) {
      s.zero_rows.push_back(static_cast<std::size_t>(i));
      s.P.row(i).setConstant(1.0 / static_cast<double>(d));
    } else {
      s.P.row(i) = eta.row(i) / s.pi(i);
    }
  }
  return s;
}

double row_cost(const CostModel& m, const Vec& pi, const Mat& P, std::size_t i) {
  double h = 0.0;
  for (std::size_t j = 0; j < m.dim(); ++j) h += m.summand(pi, P, i, j);
  return h;
}

/// Gradient of the objective in eta (perspective-function rule).
Mat objective_gradient(const VariationalObjective& obj, const CostModel& rc, const Mat& eta) {
  const auto d = eta.rows();
  const EdgeState s = split_edge_measure(eta);
  const Vec df = obj.grad_f(s.pi);
  Mat g(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    Vec m(d);
    for (Eigen::Index k = 0; k < d; ++k) m(k) = rc.marginal(s.pi, s.P, ii, static_cast<std::size_t>(k));
    for (Eigen::Index k = 0; k < d; ++k) {
      if (!std::isfinite(m(k))) m(k) = -1e12;
    }
    const double h = row_cost(rc, s.pi, s.P, ii);
    const double shift = h - s.P.row(i).dot(m.transpose());
    g.row(i) = (m.array() + shift + df(i)).matrix().transpose();
  }
  return g;
}

Vec flatten(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }
Mat unflatten(const Vec& v, Eigen::Index d) { return Eigen::Map<const Mat>(v.data(), d, d); }

}  // namespace

Mat project_holonomic(const Mat& y, int rounds) {
  const auto d = y.rows();
  if (y.cols() != d) throw DimensionMismatch("project_holonomic: expected a square matrix");
  // A eta = rowsums - colsums, as a d x d^2 operator on column-major eta.
  Mat A = Mat::Zero(d, d * d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      A(i, j * d + i) += 1.0;
      A(j, j * d + i) -= 1.0;
    }
  }
  const Mat AAt_pinv = (A * A.transpose()).completeOrthogonalDecomposition().pseudoInverse();
  auto project_affine = [&](const Vec& x) -> Vec { return x - A.transpose() * (AAt_pinv * (A * x)); };

  Vec x = flatten(y);
  Vec p = Vec::Zero(x.size());
  Vec q = Vec::Zero(x.size());
  for (int r = 0; r < std::max(rounds, 1); ++r) {
    const Vec yk = project_affine(x + p);
    p = x + p - yk;
    const Vec xn = simplex_projection(yk + q);
    q = yk + q - xn;
    x = xn;
    if ((A * x).cwiseAbs().maxCoeff() <= 1e-15) break;
  }
  const Vec z = project_affine(x);
  if (z.minCoeff() >= 0.0) x = z;
  return unflatten(x, d);
}

CostModel induced_model(const VariationalObjective& obj, const CostModel& row_costs) {
  if (!obj.f || !obj.grad_f) throw InvalidInput("induced_model: objective needs f and grad_f");
  const auto grad_f = obj.grad_f;
  if (const auto* es = row_costs.entropy()) {
    EntropyCostSpec spec = *es;
    spec.base = [base = es->base, grad_f](const Vec& pi) {
      Mat b = base(pi);
      b.colwise() += grad_f(pi);
      return b;
    };
    spec.base_grad = nullptr;
    return entropy_model(std::move(spec), row_costs.id() + "+potential");
  }
  CostFlags flags = row_costs.flags();
  flags.differentiable_in_pi = false;
  CostModel model(
      row_costs.id() + "+potential", row_costs.dim(), flags,
      [rc = row_costs, grad_f](const Vec& pi, const Mat& P, std::size_t i, std::size_t j) {
        return grad_f(pi)(static_cast<Eigen::Index>(i)) + rc.eval(pi, P, i, j);
      },
      row_costs.cost_scale());
  if (row_costs.has_marginal()) {
    model.set_marginal(
        [rc = row_costs, grad_f](const Vec& pi, const Mat& P, std::size_t i, std::size_t k) {
          return grad_f(pi)(static_cast<Eigen::Index>(i)) + rc.marginal(pi, P, i, k);
        });
  }
  return model;
}

double variational_objective(const VariationalObjective& obj, const CostModel& row_costs,
                             const Mat& eta) {
  const EdgeState s = split_edge_measure(eta);
  double total = obj.f(s.pi);
  for (Eigen::Index i = 0; i < eta.rows(); ++i) {
    if (s.pi(i) <= kZeroRow) continue;
    total += s.pi(i) * row_cost(row_costs, s.pi, s.P, static_cast<std::size_t>(i));
  }
  return total;
}

VariationalResult variational_solve(const VariationalObjective& obj, const CostModel& row_costs,
                                    const VariationalOptions& opts) {
  if (!obj.f || !obj.grad_f) throw InvalidInput("variational_solve: objective needs f and grad_f");
  if (!row_costs.flags().separable) {
    throw InvalidInput("variational_solve: row costs must be separable");
  }
  if (!row_costs.has_marginal()) {
    throw InvalidInput("variational_solve: row costs must provide marginal costs");
  }
  const auto d = static_cast<Eigen::Index>(row_costs.dim());
  Mat eta = Mat::Constant(d, d, 1.0 / static_cast<double>(d * d));
  Mat g = objective_gradient(obj, row_costs, eta);
  double step = 1.0 / std::max(1.0, row_costs.cost_scale());
  std::vector<double> history;
  int it = 0;
  for (;; ++it) {
    if (it >= opts.max_iter) {
      throw NonConvergence("variational_solve: iteration cap reached", std::move(history));
    }
    // Gradient mapping at unit scale measures stationarity.
    const Mat probe = project_holonomic(eta - g, opts.projection_rounds);
    const double gap = (eta - probe).cwiseAbs().maxCoeff();
    history.push_back(gap);
    if (gap <= opts.tol) break;

    bool accepted = false;
    for (int bt = 0; bt < 200 && step >= 1e-30; ++bt) {
      const Mat cand = project_holonomic(eta - step * g, opts.projection_rounds);
      const Mat delta = cand - eta;
      const double dn2 = delta.squaredNorm();
      if (dn2 <= 1e-32) {
        accepted = false;
        step = 0.0;
        break;
      }
      const Mat gc = objective_gradient(obj, row_costs, cand);
      const double lip = (gc - g).cwiseProduct(delta).sum() / dn2;
      if (step * lip <= 1.0 + 1e-9) {
        eta = cand;
        g = gc;
        accepted = true;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further progress at machine precision
  }

  VariationalResult res{EdgeMeasure(eta),
                        variational_objective(obj, row_costs, eta),
                        Dist(eta.rowwise().sum()),
                        StochMatrix(split_edge_measure(eta).P),
                        split_edge_measure(eta).zero_rows,
                        StationarySolution{Dist::uniform(row_costs.dim()),
                                           ValueClass(ValueVec::zero(row_costs.dim())), 0.0,
                                           StochMatrix::uniform(row_costs.dim()), 0.0, 0.0, 0, {},
                                           opts.stationary.value_norm},
                        0.0,
                        it};

  const CostModel induced = induced_model(obj, row_costs);
  const ValueSolution vs = solve_value_at(res.pi_eta, induced, opts.stationary);
  StationaryResiduals sr = stationary_residuals(res.pi_eta, vs.V, vs.lambda, induced,
                                                opts.stationary.value_norm, opts.stationary.nash);
  double policy_gap = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (std::find(res.zero_rows.begin(), res.zero_rows.end(), static_cast<std::size_t>(i)) !=
        res.zero_rows.end()) {
      continue;
    }
    policy_gap = std::max(policy_gap,
                          (res.P_eta.mat().row(i) - sr.P.mat().row(i)).cwiseAbs().maxCoeff());
  }
  res.induced = StationarySolution{res.pi_eta, ValueClass(vs.V), vs.lambda, std::move(sr.P),
                                   sr.value,   sr.dist,          vs.iterations, std::move(history),
                                   opts.stationary.value_norm};
  res.policy_gap = policy_gap;
  return res;
}

}  // namespace dmfg
