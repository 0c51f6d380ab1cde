#include "dmfg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace dmfg {

std::string_view to_string(NashMethod m) {
  switch (m) {
    case NashMethod::closed_form_entropy: return "closed_form_entropy";
    case NashMethod::rowwise_convex: return "rowwise_convex";
    case NashMethod::best_response_sweeps: return "best_response_sweeps";
    case NashMethod::vertex_linear: return "vertex_linear";
  }
  return "unknown";
}

namespace detail {

Mat softmax_rows(const Mat& base, const Vec& V, double eps) {
  Mat x = -(base.rowwise() + V.transpose()) / eps;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    x.row(i) = (x.row(i).array() - m).exp().matrix();
    x.row(i) /= x.row(i).sum();
  }
  return x;
}

Vec soft_min_rows(const Mat& base, const Vec& V, double eps) {
  const Mat x = -(base.rowwise() + V.transpose()) / eps;
  Vec out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    out(i) = -eps * (m + std::log((x.row(i).array() - m).exp().sum()));
  }
  return out;
}

}  // namespace detail

namespace {

constexpr double kFdStep = 1e-7;
constexpr double kGradFloor = -1e12;

void check_dims(const CostModel& model, std::size_t pi, std::size_t v, std::string_view what) {
  require_same_size(pi, model.dim(), what);
  require_same_size(v, model.dim(), what);
}

double row_objective(const CostModel& model, const Vec& pi, const Mat& P, std::size_t i,
                     const Vec& V) {
  const auto ii = static_cast<Eigen::Index>(i);
  double s = 0.0;
  for (std::size_t j = 0; j < model.dim(); ++j) {
    s += model.summand(pi, P, i, j) + P(ii, static_cast<Eigen::Index>(j)) * V(static_cast<Eigen::Index>(j));
  }
  return s;
}

Vec row_gradient(const CostModel& model, const Vec& pi, Mat& P, std::size_t i, const Vec& V) {
  const auto n = static_cast<Eigen::Index>(model.dim());
  const auto ii = static_cast<Eigen::Index>(i);
  Vec g(n);
  if (model.has_marginal()) {
    for (Eigen::Index k = 0; k < n; ++k) {
      g(k) = model.marginal(pi, P, i, static_cast<std::size_t>(k)) + V(k);
    }
  } else {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double saved = P(ii, k);
      P(ii, k) = saved + kFdStep;
      const double up = row_objective(model, pi, P, i, V);
      P(ii, k) = saved - kFdStep;
      const double down = row_objective(model, pi, P, i, V);
      P(ii, k) = saved;
      g(k) = (up - down) / (2.0 * kFdStep);
    }
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::isnan(g(k)) || g(k) < kGradFloor) g(k) = kGradFloor;
  }
  return g;
}

struct RowSolution {
  Vec q;
  double objective;
  double gap;  // Frank-Wolfe gap, an upper bound on objective suboptimality
};

// Projected gradient with backtracking on q -> e_i(pi, P(P, q, i), V).
RowSolution solve_row_convex(const CostModel& model, const Vec& pi, Mat P, std::size_t i,
                             const Vec& V, const Vec& start, const NashOptions& opts) {
  const auto ii = static_cast<Eigen::Index>(i);
  Vec q = simplex_projection(start);
  P.row(ii) = q.transpose();
  double phi = row_objective(model, pi, P, i, V);
  double step = 1.0 / std::max(1.0, model.cost_scale());
  std::vector<double> history;
  const double gap_tol = 1e-2 * opts.tol;

  for (int it = 0; it < opts.max_row_iter; ++it) {
    Vec g = row_gradient(model, pi, P, i, V);
    const double gap = g.dot(q) - g.minCoeff();
    history.push_back(gap);
    if (gap <= gap_tol) return {q, phi, std::max(gap, 0.0)};

    // Step accepted when the local Lipschitz estimate of the gradient along the
    // move is within 1/step. Comparing gradients instead of objective values
    // keeps the test meaningful once objective changes drop below rounding.
    Vec qn;
    Vec gn;
    bool accepted = false;
    while (step > 1e-30) {
      qn = simplex_projection(q - step * g);
      const Vec dq = qn - q;
      const double dq2 = dq.squaredNorm();
      if (dq2 == 0.0) break;
      P.row(ii) = qn.transpose();
      gn = row_gradient(model, pi, P, i, V);
      const double local_lipschitz = (gn - g).dot(dq) / dq2;
      if (step * local_lipschitz <= 1.0 + 1e-9) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      P.row(ii) = q.transpose();
      return {q, phi, std::max(gap, 0.0)};
    }
    const double moved = (qn - q).cwiseAbs().maxCoeff();
    q = qn;
    phi = row_objective(model, pi, P, i, V);
    step *= 2.0;
    if (moved <= 1e-16) {
      return {q, phi, std::max(gn.dot(q) - gn.minCoeff(), 0.0)};
    }
  }
  throw RowSolveFailure("best response row " + std::to_string(i) + " did not converge in " +
                            std::to_string(opts.max_row_iter) + " iterations",
                        std::move(history), q);
}

// Linear row objective: pick the cheapest vertex, lowest index on ties.
Vec solve_row_vertex(const CostModel& model, const Vec& pi, const Mat& P, std::size_t i,
                     const Vec& V, bool& tied) {
  const auto n = static_cast<Eigen::Index>(model.dim());
  Vec values(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    values(j) = model.eval(pi, P, i, static_cast<std::size_t>(j)) + V(j);
  }
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < n; ++j) {
    if (values(j) < values(best)) best = j;
  }
  const double slack = 1e-12 * (1.0 + std::abs(values(best)));
  tied = false;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j != best && values(j) <= values(best) + slack) tied = true;
  }
  Vec q = Vec::Zero(n);
  q(best) = 1.0;
  return q;
}

NashMethod route(const CostModel& model, const NashOptions& opts) {
  if (!model.flags().separable) return NashMethod::best_response_sweeps;
  if (opts.force_method) return *opts.force_method;
  if (model.entropy()) return NashMethod::closed_form_entropy;
  if (model.flags().pi_only) return NashMethod::vertex_linear;
  return NashMethod::rowwise_convex;
}

}  // namespace

ValueVec eval_e(const Dist& pi, const StochMatrix& P, const ValueVec& V, const CostModel& model) {
  check_dims(model, pi.size(), V.size(), "eval_e");
  require_same_size(P.size(), model.dim(), "eval_e");
  const auto n = static_cast<Eigen::Index>(model.dim());
  Vec e(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    e(i) = row_objective(model, pi.vec(), P.mat(), static_cast<std::size_t>(i), V.vec());
  }
  return ValueVec(std::move(e));
}

Dist best_response_row(std::size_t i, const Dist& pi, const StochMatrix& P, const ValueVec& V,
                       const CostModel& model, const NashOptions& opts) {
  check_dims(model, pi.size(), V.size(), "best_response_row");
  require_same_size(P.size(), model.dim(), "best_response_row");
  if (i >= model.dim()) throw InvalidInput("best_response_row: row index out of range");
  const NashMethod method =
      model.flags().separable ? route(model, opts) : NashMethod::rowwise_convex;
  switch (method) {
    case NashMethod::closed_form_entropy: {
      const auto* spec = model.entropy();
      const Mat base = spec->base_table(pi.vec());
      const Mat rows = detail::softmax_rows(base.row(static_cast<Eigen::Index>(i)), V.vec(),
                                            spec->epsilon);
      return Dist(rows.row(0).transpose());
    }
    case NashMethod::vertex_linear: {
      bool tied = false;
      return Dist(solve_row_vertex(model, pi.vec(), P.mat(), i, V.vec(), tied));
    }
    default: {
      const Vec start = P.mat().row(static_cast<Eigen::Index>(i)).transpose();
      const Vec uniform = Dist::uniform(model.dim()).vec();
      const RowSolution sol = solve_row_convex(model, pi.vec(), P.mat(), i, V.vec(),
                                               model.flags().separable ? uniform : start, opts);
      return Dist(sol.q / sol.q.sum());
    }
  }
}

NashResult nash_minimizer(const Dist& pi, const ValueVec& V, const CostModel& model,
                          const NashOptions& opts) {
  check_dims(model, pi.size(), V.size(), "nash_minimizer");
  const auto n = static_cast<Eigen::Index>(model.dim());
  const NashMethod method = route(model, opts);

  switch (method) {
    case NashMethod::closed_form_entropy: {
      const auto* spec = model.entropy();
      if (!spec) throw PreconditionError("closed-form route requires an entropy model");
      return NashResult{entropy_P(pi, V, *spec), method, 1, 0.0, {}};
    }
    case NashMethod::vertex_linear: {
      const Mat placeholder = Mat::Identity(n, n);
      Mat P(n, n);
      std::vector<std::size_t> ties;
      for (Eigen::Index i = 0; i < n; ++i) {
        bool tied = false;
        P.row(i) = solve_row_vertex(model, pi.vec(), placeholder, static_cast<std::size_t>(i),
                                    V.vec(), tied)
                       .transpose();
        if (tied) ties.push_back(static_cast<std::size_t>(i));
      }
      return NashResult{StochMatrix(std::move(P)), method, 1, 0.0, std::move(ties)};
    }
    case NashMethod::rowwise_convex: {
      const Mat start = Mat::Constant(n, n, 1.0 / static_cast<double>(n));
      Mat P = start;
      double residual = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const RowSolution sol = solve_row_convex(model, pi.vec(), start,
                                                 static_cast<std::size_t>(i), V.vec(),
                                                 start.row(i).transpose(), opts);
        P.row(i) = (sol.q / sol.q.sum()).transpose();
        residual = std::max(residual, sol.gap);
      }
      return NashResult{StochMatrix(std::move(P)), method, 1, residual, {}};
    }
    case NashMethod::best_response_sweeps: {
      Mat P = Mat::Constant(n, n, 1.0 / static_cast<double>(n));
      std::vector<double> history;
      for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        double improvement = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const auto row = static_cast<std::size_t>(i);
          const double before = row_objective(model, pi.vec(), P, row, V.vec());
          const RowSolution sol =
              solve_row_convex(model, pi.vec(), P, row, V.vec(), P.row(i).transpose(), opts);
          improvement = std::max(improvement, before - sol.objective);
          P.row(i) = (sol.q / sol.q.sum()).transpose();
        }
        history.push_back(improvement);
        if (improvement <= opts.tol) {
          return NashResult{StochMatrix(std::move(P)), method, sweep, improvement, {}};
        }
      }
      throw NonConvergence("best-response sweeps did not reach tolerance within " +
                               std::to_string(opts.max_sweeps) + " sweeps",
                           std::move(history));
    }
  }
  throw Error("nash_minimizer: unreachable");
}

StochMatrix entropy_P(const Dist& pi, const ValueVec& V, const EntropyCostSpec& spec) {
  spec.validate();
  require_same_size(pi.size(), spec.d, "entropy_P");
  require_same_size(V.size(), spec.d, "entropy_P");
  return StochMatrix(detail::softmax_rows(spec.base_table(pi.vec()), V.vec(), spec.epsilon));
}

ValueVec entropy_G(const Dist& pi, const ValueVec& V, const EntropyCostSpec& spec) {
  spec.validate();
  require_same_size(pi.size(), spec.d, "entropy_G");
  require_same_size(V.size(), spec.d, "entropy_G");
  return ValueVec(detail::soft_min_rows(spec.base_table(pi.vec()), V.vec(), spec.epsilon));
}

StepResult evolve_step(const Dist& pi, const ValueVec& V, const CostModel& model,
                       const NashOptions& opts) {
  NashResult nash = nash_minimizer(pi, V, model, opts);
  ValueVec G = (nash.method == NashMethod::closed_form_entropy)
                   ? entropy_G(pi, V, *model.entropy())
                   : eval_e(pi, nash.P, V, model);
  Dist K = push_forward(pi, nash.P);
  return StepResult{std::move(nash), std::move(G), std::move(K)};
}

ValueVec apply_G(const Dist& pi, const ValueVec& V, const CostModel& model,
                 const NashOptions& opts) {
  return evolve_step(pi, V, model, opts).G;
}

Dist apply_K(const ValueVec& V, const Dist& pi, const CostModel& model, const NashOptions& opts) {
  return evolve_step(pi, V, model, opts).K;
}

}  // namespace dmfg
