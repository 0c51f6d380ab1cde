#pragma once

// Stationary solutions (pi, V, lambda) with G_pi(V) = V + lambda and
// K_V(pi) = pi, by damped fixed-point iteration; the Perron-Frobenius
// construction for entropy models; a numerical contraction probe for the
// mean-subtracted map; and the variational (optimal stationary) solver.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/core.hpp"
#include "dmfg/costs.hpp"
#include "dmfg/equilibrium.hpp"

namespace dmfg {

/// Adaptive relaxation weight: halved whenever the residual grows, never
/// below the floor.
class Relaxation {
 public:
  Relaxation(double omega, double floor, bool adaptive);
  double omega() const noexcept { return omega_; }
  void observe(double residual);

 private:
  double omega_;
  double floor_;
  bool adaptive_;
  double previous_;
};

struct StationaryOptions {
  double tol = 1e-10;
  int max_iter = 100000;
  double omega = 0.5;
  double omega_floor = 1e-3;
  bool adaptive = true;
  NormKind value_norm = NormKind::sup;
  /// Power-iteration tolerance for the entropy route.
  double perron_tol = 1e-12;
  std::optional<Dist> initial_pi;
  std::optional<ValueVec> initial_V;
  NashOptions nash;
};

struct StationarySolution {
  Dist pi_bar;
  ValueClass V_bar;
  double lambda_bar;
  StochMatrix P_bar;
  double residual_value;  // sharp norm of G(V) - V - lambda
  double residual_dist;   // euclidean norm of K(pi) - pi
  int iterations = 0;
  std::vector<double> history;  // max of both residuals, per iteration
  NormKind value_norm = NormKind::sup;
};

/// Residuals of a candidate (pi, V, lambda) against the stationary system.
struct StationaryResiduals {
  double value;   // sharp norm of G(V) - V - lambda
  double lambda;  // |mean(G(V) - V) - lambda|
  double dist;    // euclidean norm of K(pi) - pi
  StochMatrix P;
};
StationaryResiduals stationary_residuals(const Dist& pi, const ValueVec& V, double lambda,
                                         const CostModel& model, NormKind value_norm = NormKind::sup,
                                         const NashOptions& nash = {});

struct PerronResult {
  double eigenvalue;      // exp(-lambda_pi / eps); may be 0 or inf outside double range
  double lambda_pi;       // -eps ln(eigenvalue), computed without forming the eigenvalue
  Vec psi;                // strictly positive, sums to 1
  ValueVec V_pi;          // -eps ln psi, mean-zero
  int iterations = 0;
  double eigen_residual;  // |L psi - mu psi|_sup / |mu psi|_sup on the scaled operator
};

struct PerronOptions {
  double tol = 1e-12;
  int max_iter = 100000;
};

/// Principal eigenpair of L_pi(psi)_i = sum_k exp(-c_ik(pi)/eps) psi_k by
/// power iteration from the uniform vector.
PerronResult perron_eigen(const Dist& pi, const EntropyCostSpec& spec,
                          const PerronOptions& opts = {});

/// Damped iteration pi <- (1-w) pi + w K(pi), with V^pi from perron_eigen.
StationarySolution stationary_entropy(const EntropyCostSpec& spec,
                                      const StationaryOptions& opts = {});

/// Damped iteration of the mean-subtracted pair (G^, K^) on (R^d/R) x S.
StationarySolution stationary_generic(const CostModel& model, const StationaryOptions& opts = {});

/// lambda = sum_ij pi_i c_ij(pi, P) P_ij (entropy summand by continuity).
/// Throws PreconditionError if |pi P - pi| > stationarity_tol.
double critical_value(const Dist& pi_bar, const StochMatrix& P_bar, const CostModel& model,
                      const ValueVec& V_bar, double stationarity_tol = 1e-8);

/// Value problem at a frozen distribution: finds V (mean-zero) and lambda with
/// G_pi(V) = V + lambda. Entropy models use perron_eigen; others use damped
/// relative value iteration.
struct ValueSolution {
  ValueVec V;
  double lambda;
  double residual;
  int iterations;
};
ValueSolution solve_value_at(const Dist& pi, const CostModel& model,
                             const StationaryOptions& opts = {});

// --------------------------------------------------------------------------
// Contraction probe

struct ContractionReport {
  double epsilon;
  /// d x d partial-derivative blocks dG/dV, dG/dpi, dK/dV, dK/dpi of the plain
  /// operators along coordinate axes.
  std::array<Mat, 4> jacobian_blocks;
  /// The same blocks for the mean-subtracted map.
  std::array<Mat, 4> hatted_blocks;
  /// Largest singular value of D(T^2) restricted to mean-zero V directions and
  /// zero-sum pi directions.
  double norm_T2;
  /// Largest singular value of DT on the same subspaces.
  double norm_T;
  bool contracting;
};

ContractionReport contraction_probe(const EntropyCostSpec& spec, const Dist& pi,
                                    const ValueVec& V);

struct ContractionScan {
  std::vector<double> epsilons;
  std::vector<double> norms;
  /// Smallest scanned epsilon from which every larger scanned value contracts;
  /// empty if the largest one does not.
  std::optional<double> threshold;
};

/// Probes each epsilon at that epsilon's stationary solution.
ContractionScan scan_contraction(const std::function<EntropyCostSpec(double)>& make_spec,
                                 const std::vector<double>& epsilons,
                                 const StationaryOptions& opts = {});

// --------------------------------------------------------------------------
// Optimal stationary solutions

struct VariationalOptions {
  double tol = 1e-11;
  int max_iter = 200000;
  int projection_rounds = 100;
  StationaryOptions stationary;
};

struct VariationalResult {
  EdgeMeasure eta;
  double objective;
  Dist pi_eta;
  StochMatrix P_eta;               // eta_ij / pi_i (uniform on flagged rows)
  std::vector<std::size_t> zero_rows;  // rows with pi_i = 0, P undefined there
  StationarySolution induced;      // (pi_eta, V) with V from the value problem
  double policy_gap;               // max |P_eta - P_bar(pi_eta, V)|
  int iterations = 0;
};

/// Cost model of the mean field game induced by the potential: c_ij + df/dpi_i.
CostModel induced_model(const VariationalObjective& obj, const CostModel& row_costs);

/// Objective sum_ij eta_ij c~_ij(P^eta_i.) + f(pi^eta) for a given eta.
double variational_objective(const VariationalObjective& obj, const CostModel& row_costs,
                             const Mat& eta);

/// Minimizes the objective over edge measures with equal row and column sums.
/// row_costs must be separable and independent of pi.
VariationalResult variational_solve(const VariationalObjective& obj, const CostModel& row_costs,
                                    const VariationalOptions& opts = {});

/// Euclidean projection onto {eta >= 0, sum eta = 1, row sums = column sums}
/// by Dykstra's alternating projections.
Mat project_holonomic(const Mat& y, int rounds);

}  // namespace dmfg
