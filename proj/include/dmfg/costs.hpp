#pragma once

// Transition cost models c_ij(pi, P).
//
// A CostModel is a type-erased, immutable evaluator plus capability flags that
// the Nash solver uses to pick a strategy:
//   entropy structure  -> closed-form softmax minimizer
//   pi_only            -> the row objective is linear, best response is a vertex
//   separable          -> rows are independent convex programs
//   otherwise          -> Gauss-Seidel best-response sweeps
//
// Evaluators take raw Eigen arrays rather than Dist/StochMatrix so that finite
// differences may step slightly off the simplex.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>

#include "dmfg/core.hpp"

namespace dmfg {

struct CostFlags {
  bool separable = true;             // c_ij depends on P only through row i
  bool pi_only = false;              // c_ij independent of P
  bool differentiable_in_pi = false; // an analytic pi-gradient is attached
};

using CostFn = std::function<double(const Vec& pi, const Mat& P, std::size_t i, std::size_t j)>;
using CostGradFn = std::function<Vec(const Vec& pi, const Mat& P, std::size_t i, std::size_t j)>;
/// m_ik = c_ik + sum_j P_ij dc_ij/dP_ik, so that de_i/dP_ik = m_ik + V_k.
using MarginalFn = std::function<double(const Vec& pi, const Mat& P, std::size_t i, std::size_t k)>;

/// c_ij(pi, P) = base_ij(pi) + epsilon * ln(P_ij).
struct EntropyCostSpec {
  std::size_t d = 0;
  double epsilon = 1.0;
  /// Full d x d table of base costs at pi.
  std::function<Mat(const Vec& pi)> base;
  /// Optional: gradient of base_ij with respect to pi.
  std::function<Vec(const Vec& pi, std::size_t i, std::size_t j)> base_grad;

  Mat base_table(const Vec& pi) const { return base(pi); }
  void validate() const;
};

/// Entropy spec with a pi-independent base table.
EntropyCostSpec entropy_table_spec(Mat base, double epsilon);

class CostModel {
 public:
  CostModel(std::string id, std::size_t d, CostFlags flags, CostFn eval, double cost_scale);

  const std::string& id() const noexcept { return id_; }
  std::size_t dim() const noexcept { return d_; }
  const CostFlags& flags() const noexcept { return flags_; }
  /// Typical magnitude of the costs; used to size sampling boxes.
  double cost_scale() const noexcept { return cost_scale_; }

  /// Bare cost. For entropy models this is +infinity where P_ij = 0.
  double eval(const Vec& pi, const Mat& P, std::size_t i, std::size_t j) const;
  /// P_ij * c_ij(pi, P), extended by continuity to 0 where P_ij = 0.
  double summand(const Vec& pi, const Mat& P, std::size_t i, std::size_t j) const;

  bool has_grad_pi() const noexcept { return static_cast<bool>(grad_); }
  Vec grad_pi(const Vec& pi, const Mat& P, std::size_t i, std::size_t j) const;

  bool has_marginal() const noexcept { return static_cast<bool>(marginal_); }
  double marginal(const Vec& pi, const Mat& P, std::size_t i, std::size_t k) const;

  const EntropyCostSpec* entropy() const noexcept { return entropy_ ? &*entropy_ : nullptr; }

  CostModel& set_grad_pi(CostGradFn grad);
  CostModel& set_marginal(MarginalFn marginal);
  CostModel& set_entropy(EntropyCostSpec spec);

 private:
  std::string id_;
  std::size_t d_;
  CostFlags flags_;
  CostFn eval_;
  CostGradFn grad_;
  MarginalFn marginal_;
  std::optional<EntropyCostSpec> entropy_;
  double cost_scale_;
};

/// c_ij(pi, P) evaluated on validated inputs.
double eval_cost(const CostModel& model, const Dist& pi, const StochMatrix& P, std::size_t i,
                 std::size_t j);

/// Gradient of c_ij with respect to pi. Uses the model's analytic gradient when
/// present, otherwise central differences (step 1e-6) along coordinate axes.
Vec cost_grad_pi(const CostModel& model, const Dist& pi, const StochMatrix& P, std::size_t i,
                 std::size_t j);

// --------------------------------------------------------------------------
// Built-in models

CostModel entropy_model(EntropyCostSpec spec, std::string id = "entropy");

/// c_ij = W_i(pi) + tilde_c_ij (+ epsilon ln P_ij when epsilon > 0).
struct MonotoneWSpec {
  std::function<Vec(const Vec& pi)> W;
  /// Optional Jacobian dW_i/dpi_j.
  std::function<Mat(const Vec& pi)> W_jacobian;
  Mat tilde_c;
  double gamma_w = 1.0;
  double epsilon = 1.0;
};

/// W = alpha * pi, the gradient of f(pi) = alpha/2 |pi|^2; gamma_w = alpha.
MonotoneWSpec quadratic_monotone_spec(Mat tilde_c, double alpha, double epsilon);
CostModel monotone_w_model(const MonotoneWSpec& spec, std::string id = "monotone_w");

/// Two-state example with a continuum of stationary solutions:
/// c_12 = c_21 = 100 and c_11(pi) = c_22(pi) = pi_1.
CostModel theta_example_model();

enum class CongestionCoupling {
  origin,      // c_ij = a_ij + b_i pi_i : crowding at the state you leave
  destination  // c_ij = a_ij + b_j pi_j : crowding at the state you enter
};

std::string_view to_string(CongestionCoupling c);
CongestionCoupling congestion_coupling_from_string(std::string_view name);

/// Congestion table with optional entropy penalty (epsilon = 0 gives a
/// pi-only linear model).
struct CongestionSpec {
  Mat a;
  Vec b;
  double epsilon = 1.0;
  CongestionCoupling coupling = CongestionCoupling::origin;
};

CostModel congestion_model(const CongestionSpec& spec, std::string id = "congestion");

/// pi-independent, P-independent cost table.
CostModel constant_table_model(Mat c, std::string id = "constant");

/// Separable, strictly convex row cost without entropy:
/// c_ij(pi, P_i.) = a_ij + kappa P_ij + w_i pi_i.
CostModel quadratic_row_model(Mat a, double kappa, Vec w, std::string id = "quadratic_row");

/// Non-separable cost: c_ij(pi, P) = a_ij + kappa P_ij + sigma sum_k P_kj.
/// Every row's cost sees the total inflow into j.
CostModel flow_congestion_model(Mat a, double kappa, double sigma,
                                std::string id = "flow_congestion");

/// C^1 convex potential f on the simplex and its gradient.
struct VariationalObjective {
  std::function<double(const Vec& pi)> f;
  std::function<Vec(const Vec& pi)> grad_f;
};

/// f(pi) = alpha/2 |pi|^2.
VariationalObjective quadratic_objective(double alpha);

}  // namespace dmfg
