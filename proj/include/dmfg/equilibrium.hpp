#pragma once

// Per-state expected cost, Nash-minimizing transition matrices and the
// one-step operators G (backward, on values) and K (forward, on distributions).

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "dmfg/core.hpp"
#include "dmfg/costs.hpp"

namespace dmfg {

enum class NashMethod { closed_form_entropy, rowwise_convex, best_response_sweeps, vertex_linear };

std::string_view to_string(NashMethod m);

struct NashOptions {
  /// Row objective tolerance; also the acceptance threshold for the residual.
  double tol = 1e-10;
  int max_row_iter = 10000;
  int max_sweeps = 500;
  /// Override automatic routing (e.g. to run the generic row optimizer on an
  /// entropy model). Non-separable models always use sweeps.
  std::optional<NashMethod> force_method;
};

struct NashResult {
  StochMatrix P;
  NashMethod method;
  int sweeps_used = 0;
  /// Max over rows of an upper bound on the best-response improvement.
  double residual = 0.0;
  /// Rows whose linear best response had several minimizing vertices.
  std::vector<std::size_t> tied_rows;
};

/// Row solver failure; keeps the best row found.
class RowSolveFailure : public NonConvergence {
 public:
  RowSolveFailure(const std::string& what, std::vector<double> history, Vec best)
      : NonConvergence(what, std::move(history)), best_(std::move(best)) {}
  const Vec& best_iterate() const noexcept { return best_; }

 private:
  Vec best_;
};

/// e_i = sum_j P_ij (c_ij(pi, P) + V_j), entropy summand extended by continuity.
ValueVec eval_e(const Dist& pi, const StochMatrix& P, const ValueVec& V, const CostModel& model);

/// argmin over q in the simplex of q -> e_i(pi, P(P, q, i), V).
Dist best_response_row(std::size_t i, const Dist& pi, const StochMatrix& P, const ValueVec& V,
                       const CostModel& model, const NashOptions& opts = {});

NashResult nash_minimizer(const Dist& pi, const ValueVec& V, const CostModel& model,
                          const NashOptions& opts = {});

/// Softmax minimizer of the entropy-penalized model.
StochMatrix entropy_P(const Dist& pi, const ValueVec& V, const EntropyCostSpec& spec);

/// G_pi(V)_i = -eps ln sum_k exp(-(c_ik(pi) + V_k)/eps), log-sum-exp stabilized.
ValueVec entropy_G(const Dist& pi, const ValueVec& V, const EntropyCostSpec& spec);

ValueVec apply_G(const Dist& pi, const ValueVec& V, const CostModel& model,
                 const NashOptions& opts = {});
Dist apply_K(const ValueVec& V, const Dist& pi, const CostModel& model,
             const NashOptions& opts = {});

/// Both operators evaluated with one shared Nash minimizer.
struct StepResult {
  NashResult nash;
  ValueVec G;
  Dist K;
};
StepResult evolve_step(const Dist& pi, const ValueVec& V, const CostModel& model,
                       const NashOptions& opts = {});

namespace detail {

/// Softmax rows of exp(-(base_ik + V_k)/eps). Works for any finite inputs.
Mat softmax_rows(const Mat& base, const Vec& V, double eps);
/// Row-wise -eps * logsumexp(-(base_ik + V_k)/eps).
Vec soft_min_rows(const Mat& base, const Vec& V, double eps);

}  // namespace detail

}  // namespace dmfg
