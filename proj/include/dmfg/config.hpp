#pragma once

// Run configuration for the command-line front end: a JSON document parsed
// into a typed RunConfig. Unknown keys are rejected at every level, and
// every numeric field is range-checked. The schema is in docs/config.md.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dmfg/costs.hpp"
#include "dmfg/errors.hpp"
#include "dmfg/serialize.hpp"
#include "dmfg/stationary.hpp"

namespace dmfg {

/// Malformed or out-of-range configuration. The message starts with the
/// dotted path of the offending field.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

enum class ModelType { entropy, monotone_w, theta_example, congestion, custom };

std::string_view to_string(ModelType t);

struct ModelConfig {
  ModelType type = ModelType::entropy;
  /// base (entropy), tilde_c (monotone_w), a (congestion) or table (custom).
  std::optional<Mat> table;
  std::optional<Vec> b;  // congestion
  double alpha = 1.0;    // monotone_w
  double theta = 0.5;    // theta_example
  CongestionCoupling coupling = CongestionCoupling::origin;
  bool entropy = true;   // custom: add epsilon ln P to the table
};

enum class StationaryMethod { automatic, perron, generic };

struct SolverConfig {
  StationaryMethod method = StationaryMethod::automatic;
  double tol = 1e-10;
  int max_iter = 100000;
  double omega = 0.5;
  double omega_floor = 1e-3;
  bool adaptive = true;
  double perron_tol = 1e-12;
  double nash_tol = 1e-10;
  NormKind value_norm = NormKind::sup;
  NormKind f_norm = NormKind::euclid;
  double horizon_tol = 1e-10;
  int horizon_max_iter = 10000;
};

struct HorizonConfig {
  std::optional<std::size_t> N;
  std::vector<std::size_t> Ns;
  /// Start from the stationary solution instead of initial_pi / terminal_V.
  bool from_stationary = false;
};

struct DiagnosticsConfig {
  std::size_t samples = 1000;
  double box_scale = 3.0;
  std::optional<double> C_est;
};

struct VariationalConfig {
  /// Potential f = alpha/2 |pi|^2. Defaults to the model's alpha for
  /// monotone_w and to 0 otherwise.
  std::optional<double> alpha;
  double tol = 1e-11;
  int max_iter = 200000;
};

struct RunConfig {
  ModelConfig model;
  std::size_t d = 0;
  double epsilon = 1.0;
  HorizonConfig horizon;
  std::optional<Vec> initial_pi;
  std::optional<Vec> terminal_V;
  SolverConfig solver;
  DiagnosticsConfig diagnostics;
  VariationalConfig variational;
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: the working directory
};

/// Parses and validates a configuration document.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_json(const nlohmann::json& doc);

/// Canonical form with every default filled in; parse_config_json of the
/// result gives back an equivalent RunConfig.
Json config_to_json(const RunConfig& c);

enum class Command { stationary, evolve, turnpike, check, variational };

std::string_view to_string(Command c);

/// Command-specific requirements (N for evolve, Ns for turnpike, ...).
void require_for(const RunConfig& c, Command cmd);

CostModel build_model(const RunConfig& c);
StationaryOptions stationary_options(const RunConfig& c);
HorizonOptions horizon_options(const RunConfig& c);

/// Stationary solution by the configured method; theta_example starts from
/// (theta, 1 - theta) with V = 0 unless initial_pi is given.
StationarySolution solve_stationary(const RunConfig& c, const CostModel& model);

}  // namespace dmfg
