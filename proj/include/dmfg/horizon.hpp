#pragma once

// Finite-horizon mean field games: given an initial distribution and terminal
// values, find (pi^n, V^n) with V^n = G_{pi^n}(V^{n+1}) and
// pi^{n+1} = K_{V^{n+1}}(pi^n). Also the turnpike sweep towards a stationary
// solution and the decay diagnostics built on the f_n sequence.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/core.hpp"
#include "dmfg/costs.hpp"
#include "dmfg/equilibrium.hpp"
#include "dmfg/stationary.hpp"

namespace dmfg {

struct Trajectory {
  std::size_t N = 0;
  std::vector<Dist> pis;       // pi^0 .. pi^N
  std::vector<ValueVec> Vs;    // V^0 .. V^N
  std::vector<StochMatrix> Ps; // P^0 .. P^{N-1}
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> history;  // sup change of the pi-sequence per outer iteration
};

enum class InitialGuess {
  constant,       // pi^n = pi^0 for all n
  interpolate,    // linear from pi^0 to the supplied target
  explicit_guess  // the supplied sequence
};

struct HorizonOptions {
  double tol = 1e-10;
  int max_iter = 10000;
  double omega = 0.5;
  double omega_floor = 1e-3;
  bool adaptive = true;
  InitialGuess guess = InitialGuess::constant;
  std::optional<Dist> target;             // for InitialGuess::interpolate
  std::vector<Dist> guess_sequence;       // for InitialGuess::explicit_guess, N+1 entries
  NashOptions nash;
};

/// Picard iteration on the pi-sequence: backward G pass from V^N, forward K
/// pass from pi^0, relaxation of the sequence. Throws NonConvergence (with the
/// history) when the cap is hit.
Trajectory solve_initial_terminal(const Dist& pi0, const ValueVec& VN, std::size_t N,
                                  const CostModel& model, const HorizonOptions& opts = {});

/// max over n of |V^n - G_{pi^n}(V^{n+1})|_# and |pi^{n+1} - K_{V^{n+1}}(pi^n)|.
double trajectory_residual(const Trajectory& t, const CostModel& model,
                           NormKind value_norm = NormKind::sup, const NashOptions& nash = {});

/// Constant trajectory (pi_bar, V_bar + (N - n) lambda_bar), n = 0..N.
Trajectory stationary_trajectory(const StationarySolution& s, std::size_t N);

/// f_n between two trajectories. With centered_at_zero, both have horizon 2M
/// stored as 0..2M, time zero is index M, and
///   f_0 = |pi^0 - pi~^0|^2 + |V^0 - V~^0|_#^2,
///   f_n = the same at +n plus the same at -n (n = 1..M).
/// Otherwise time zero is index 0 and f_n = |pi^n - pi~^n|^2 + |V^n - V~^n|_#^2.
std::vector<double> f_sequence(const Trajectory& t1, const Trajectory& t2, bool centered_at_zero,
                               NormKind value_norm = NormKind::euclid);

struct NumerosReport {
  bool premise_ok;      // sum_{n<M} f_n <= C f_M for every M = 1..N
  std::optional<std::size_t> first_premise_violation;
  double lhs;           // f_0
  double rhs;           // C (C/(C+1))^{N-1} f_N
  bool conclusion_ok;   // lhs <= rhs within relative slack 1e-9
};

/// Full check of the decay lemma; throws InvalidInput on negative entries.
NumerosReport numeros_report(const std::vector<double>& f, double C);
/// The lemma's conclusion f_0 <= C (C/(C+1))^{N-1} f_N.
bool check_numeros(const std::vector<double>& f, double C);

struct ValueBound {
  double lhs;  // |V~^0 - V^0|_sup
  double rhs;  // |V~^{2M} - V^{2M}|_sup + 2 M K
  bool ok;
};
/// The a-priori bound for two trajectories of horizon 2M (stored 0..2M).
ValueBound value_bound(const Trajectory& t1, const Trajectory& t2, double K_est);
bool check_value_bound(const Trajectory& t1, const Trajectory& t2, double K_est);

struct LogLinearFit {
  double slope;
  double intercept;
  double r_squared;
  std::size_t points;
};
/// Least squares of log(y) on x, skipping y < floor. Empty below 3 points.
std::optional<LogLinearFit> fit_log_linear(const std::vector<double>& x,
                                           const std::vector<double>& y, double floor = 1e-12);

struct TurnpikeOptions {
  HorizonOptions horizon;
  NormKind value_norm = NormKind::sup;
  NormKind f_norm = NormKind::euclid;
  /// 1/gamma; estimated with the diagnostics module when absent.
  std::optional<double> C_est;
  std::size_t diagnostic_samples = 1000;
  std::uint64_t seed = 0;
  /// 0 uses the DMFG_THREADS environment variable, else 1.
  unsigned threads = 0;
};

struct TurnpikeReport {
  std::vector<std::size_t> Ns;
  std::vector<double> dist_pi;   // NaN where the solve failed
  std::vector<double> dist_V;
  std::vector<double> residuals;
  std::vector<std::string> failures;  // empty string on success
  std::vector<double> f_seq;     // for the largest successful N
  std::optional<LogLinearFit> fit;
  double fitted_rate;            // slope of the fit, NaN without fit
  double C_est;
  bool numeros_ok;
  bool numeros_premise_ok;
  /// Smallest index from which dist_pi (above 1e-12) is non-increasing.
  std::size_t burn_in = 0;
};

/// For each N solves the horizon-2N problem with pi^0 = pi_init and
/// V^{2N} = V_term and compares the midpoint with the stationary solution.
TurnpikeReport turnpike_sweep(const CostModel& model, const Dist& pi_init, const ValueVec& V_term,
                              const std::vector<std::size_t>& Ns, const StationarySolution& stat,
                              const TurnpikeOptions& opts = {});

/// Worker count from DMFG_THREADS (>= 1; 1 when unset or invalid).
unsigned thread_count_from_env();

}  // namespace dmfg
