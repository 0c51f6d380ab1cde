#pragma once

// Sampled checks of the structural hypotheses on a concrete cost model and
// estimates of the constants (gamma, C, K) used by the horizon bounds.
//
// Samples come from one mt19937_64 stream seeded once, drawn in a fixed order
// per sample, so a run with more samples sees a superset of the inputs of a
// run with fewer: gamma estimates can only go down, C and K only up.

#include <cstdint>
#include <string>
#include <vector>

#include "dmfg/core.hpp"
#include "dmfg/costs.hpp"
#include "dmfg/equilibrium.hpp"

namespace dmfg {

struct SampleOptions {
  std::size_t n_samples = 1000;
  std::uint64_t seed = 0;
  /// V entries are drawn from [-B, B] with B = box_scale * cost_scale.
  double box_scale = 3.0;
  /// Norm on distributions is euclidean; this selects the sharp norm on values.
  NormKind value_norm = NormKind::euclid;
  double slack = 1e-10;
  NashOptions nash;
};

/// One sampled input that achieved a binding ratio or a violation.
struct WorstCase {
  std::string check;
  double ratio = 0.0;
  std::vector<Vec> pis;
  std::vector<Vec> Vs;
};

struct GammaEstimate {
  double gamma = 0.0;       // clamped at 0
  double raw_infimum = 0.0; // before clamping
  bool failed = false;      // some sample violated the inequality
  std::size_t used = 0;     // samples that were not skipped
  WorstCase worst;
};

struct CheckResult {
  bool ok = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  double worst_excess = 0.0;  // largest amount by which an inequality failed (or came closest)
  WorstCase worst;
};

struct SpreadEstimate {
  double C_spread = 0.0;  // max |G_pi(V)_i - G_pi(V)_i'|
  double C_hp6 = 0.0;     // max of sum_j |c_ij(P) - c_i'j(rho_{i,i'}(P))| P_ij
  WorstCase worst;
};

struct KEstimate {
  double K = 0.0;
  WorstCase worst;
};

GammaEstimate gamma_hp8(const CostModel& model, const SampleOptions& opts = {});
GammaEstimate gamma_hp10(const CostModel& model, const SampleOptions& opts = {});
CheckResult hp9(const CostModel& model, const SampleOptions& opts = {});
CheckResult hp3(const CostModel& model, const SampleOptions& opts = {});
SpreadEstimate spread_C(const CostModel& model, const SampleOptions& opts = {});
KEstimate K_hp11(const CostModel& model, const SampleOptions& opts = {});

/// G_pi(V2)_i <= G_pi(V1)_i + sum_j P^{V1}_ij (V2 - V1)_j for all i.
CheckResult kav2(const CostModel& model, const SampleOptions& opts = {});
/// pi . (G_pi(V2) - G_pi(V1)) - (V2 - V1) . K_{V1}(pi) <= 0.
CheckResult kav3(const CostModel& model, const SampleOptions& opts = {});
/// V2 >= V1 implies 0 <= G(V2) - G(V1) <= P^{V1} (V2 - V1).
CheckResult order_preservation(const CostModel& model, const SampleOptions& opts = {});
/// |G_pi(V)_i - G_pi(V)_i'| <= C_hp6 at the sampled point, with C_hp6
/// evaluated at the Nash P of that point (the matrix the proof uses).
CheckResult spread_bound(const CostModel& model, const SampleOptions& opts = {});

// Convenience wrappers with the plain signatures.
double estimate_gamma_hp8(const CostModel& model, std::size_t n_samples, std::uint64_t seed = 0);
double estimate_gamma_hp10(const CostModel& model, std::size_t n_samples, std::uint64_t seed = 0);
bool check_hp9(const CostModel& model, std::size_t n_samples, std::uint64_t seed = 0);
bool check_hp3(const CostModel& model, std::size_t n_samples, std::uint64_t seed = 0);
double estimate_spread_C(const CostModel& model, std::size_t n_samples, std::uint64_t seed = 0);
double estimate_K_hp11(const CostModel& model, std::size_t n_samples, std::uint64_t seed = 0);

/// Builds J_kl = (p_k p_l - p_k delta_kl) / eps.
Mat entropy_value_hessian(const Dist& p, double epsilon);

struct SimpleEvReport {
  bool simple_zero;     // exactly one eigenvalue with |mu| <= 1e-12
  double gap;           // smallest |mu| among the others
  Vec eigenvalues;      // ascending
  double fd_error;      // sup |J - finite-difference Hessian of the entropy G|
  bool fd_ok;           // fd_error <= 1e-5
};

/// Throws PreconditionError unless 0 < p_k < 1 (with margin 1e-9) for all k.
SimpleEvReport simpleev_report(const Dist& p, double epsilon);
bool check_jacobian_simpleev(const Dist& p, double epsilon);

struct AssumptionReport {
  std::string model_id;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  double gamma_hp8 = 0.0;
  bool hp8_failed = false;
  double gamma_hp10 = 0.0;
  bool hp10_failed = false;
  double C_spread = 0.0;
  double C_hp6 = 0.0;
  double K_hp11 = 0.0;
  bool hp3_ok = false;
  bool hp9_ok = false;
  bool kav_ok = false;          // kav2, kav3 and order preservation
  bool spread_bound_ok = false;
  std::vector<WorstCase> worst_cases;
};

/// Runs every estimator and check. The kav checks and hp9 rest on separability;
/// on other models they are still run and their outcome reported as is.
AssumptionReport assess(const CostModel& model, const SampleOptions& opts = {});

/// C = 1 / min(gamma_hp8, gamma_hp10); infinity if either vanishes.
double turnpike_constant(const AssumptionReport& r);

}  // namespace dmfg
