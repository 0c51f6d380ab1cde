#include "dmfg/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "dmfg/config.hpp"
#include "dmfg/diagnostics.hpp"
#include "dmfg/horizon.hpp"
#include "dmfg/serialize.hpp"

namespace dmfg {

namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kNonConvergence = 2;
constexpr int kInternal = 3;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool quiet = false;
  bool timing = false;
};

/// Output files of one run. Everything is written with a ".partial" suffix
/// and renamed only once the whole command has succeeded.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / (name + ".partial");
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << content;
    f.close();
    if (!f) throw Error("cannot write " + p.string());
    names_.push_back(name);
  }

  void commit() {
    for (const auto& n : names_) fs::rename(dir_ / (n + ".partial"), dir_ / n);
  }

  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

Json stationary_stage(const StationarySolution& s) {
  Json st;
  st["name"] = "stationary";
  st["iterations"] = s.iterations;
  st["lambda_bar"] = json_real(s.lambda_bar);
  st["residual_value"] = json_real(s.residual_value);
  st["residual_dist"] = json_real(s.residual_dist);
  return st;
}

struct Run {
  const RunConfig& cfg;
  const CostModel& model;
  Outputs& outputs;
  Json stages = Json::array();
  std::string summary;
  int status = kOk;
};

void cmd_stationary(Run& r) {
  const StationarySolution s = solve_stationary(r.cfg, r.model);
  r.stages.push_back(stationary_stage(s));
  r.outputs.write("stationary.json", dump(to_json(s)));
  r.summary = "stationary: lambda_bar=" + fmt("%.15g", s.lambda_bar) +
              " residual_value=" + fmt("%.3e", s.residual_value) +
              " residual_dist=" + fmt("%.3e", s.residual_dist) +
              " iterations=" + std::to_string(s.iterations);
}

/// (pi0, V_terminal) from the config, or the stationary pair when requested.
std::pair<Dist, ValueVec> horizon_data(Run& r, std::optional<StationarySolution>& stat) {
  if (r.cfg.horizon.from_stationary) {
    if (!stat) {
      stat = solve_stationary(r.cfg, r.model);
      r.stages.push_back(stationary_stage(*stat));
    }
    return {stat->pi_bar, stat->V_bar.rep()};
  }
  return {Dist::from_weights(*r.cfg.initial_pi), ValueVec(*r.cfg.terminal_V)};
}

void cmd_evolve(Run& r) {
  std::optional<StationarySolution> stat;
  const auto [pi0, VN] = horizon_data(r, stat);
  const std::size_t N = *r.cfg.horizon.N;
  const HorizonOptions ho = horizon_options(r.cfg);
  const Trajectory t = solve_initial_terminal(pi0, VN, N, r.model, ho);
  const double res = trajectory_residual(t, r.model, r.cfg.solver.value_norm, ho.nash);

  Json st;
  st["name"] = "horizon";
  st["N"] = N;
  st["iterations"] = t.iterations;
  st["change"] = json_real(t.residual);
  st["residual"] = json_real(res);
  r.stages.push_back(std::move(st));

  std::ostringstream csv;
  write_trajectory_csv(csv, t);
  r.outputs.write("trajectory.csv", csv.str());
  r.summary = "evolve: N=" + std::to_string(N) + " iterations=" + std::to_string(t.iterations) +
              " residual=" + fmt("%.3e", res);
}

void cmd_turnpike(Run& r) {
  std::optional<StationarySolution> stat = solve_stationary(r.cfg, r.model);
  r.stages.push_back(stationary_stage(*stat));
  const auto [pi_init, V_term] = horizon_data(r, stat);

  TurnpikeOptions to;
  to.horizon = horizon_options(r.cfg);
  to.value_norm = r.cfg.solver.value_norm;
  to.f_norm = r.cfg.solver.f_norm;
  to.C_est = r.cfg.diagnostics.C_est;
  to.diagnostic_samples = r.cfg.diagnostics.samples;
  to.seed = r.cfg.seed;
  const TurnpikeReport rep = turnpike_sweep(r.model, pi_init, V_term, r.cfg.horizon.Ns, *stat, to);

  std::size_t failed = 0;
  for (const auto& f : rep.failures) failed += f.empty() ? 0 : 1;
  Json st;
  st["name"] = "turnpike";
  st["horizons"] = rep.Ns.size();
  st["failed"] = failed;
  st["residuals"] = to_json(rep).at("residuals");
  r.stages.push_back(std::move(st));

  r.outputs.write("turnpike.json", dump(to_json(rep)));
  std::ostringstream csv;
  write_turnpike_csv(csv, rep);
  r.outputs.write("turnpike_distances.csv", csv.str());

  r.summary = "turnpike: horizons=" + std::to_string(rep.Ns.size()) +
              " failed=" + std::to_string(failed) +
              (rep.fit ? " rate=" + fmt("%.6g", rep.fit->slope) + " r2=" + fmt("%.6f", rep.fit->r_squared)
                       : std::string(" fit=none")) +
              " C_est=" + fmt("%.6g", rep.C_est) + " numeros=" + (rep.numeros_ok ? "ok" : "failed");
  if (failed > 0) r.status = kNonConvergence;
}

void cmd_check(Run& r, std::ostream& out, bool quiet) {
  SampleOptions so;
  so.n_samples = r.cfg.diagnostics.samples;
  so.seed = r.cfg.seed;
  so.box_scale = r.cfg.diagnostics.box_scale;
  so.nash.tol = r.cfg.solver.nash_tol;
  const AssumptionReport rep = assess(r.model, so);

  Json st;
  st["name"] = "check";
  st["samples"] = rep.samples;
  r.stages.push_back(std::move(st));
  r.outputs.write("assumptions.json", dump(to_json(rep)));
  if (!quiet) write_assumption_table(out, rep);
  r.summary = "check: gamma_hp8=" + fmt("%.6g", rep.gamma_hp8) + " gamma_hp10=" + fmt("%.6g", rep.gamma_hp10) +
              " K_hp11=" + fmt("%.6g", rep.K_hp11);
}

void cmd_variational(Run& r) {
  const RunConfig& c = r.cfg;
  const auto d = static_cast<Eigen::Index>(c.d);
  const Mat table = c.model.table ? *c.model.table : Mat::Zero(d, d);
  double alpha = 0.0;
  std::optional<CostModel> rows;
  if (c.model.type == ModelType::monotone_w) {
    alpha = c.model.alpha;
    rows = entropy_model(entropy_table_spec(table, c.epsilon));
  } else {
    rows = r.model;
  }
  if (c.variational.alpha) alpha = *c.variational.alpha;

  VariationalOptions vo;
  vo.tol = c.variational.tol;
  vo.max_iter = c.variational.max_iter;
  vo.stationary = stationary_options(c);
  const VariationalResult v = variational_solve(quadratic_objective(alpha), *rows, vo);

  Json st;
  st["name"] = "variational";
  st["iterations"] = v.iterations;
  st["objective"] = json_real(v.objective);
  st["holonomy_residual"] = json_real(v.eta.holonomy_residual());
  st["policy_gap"] = json_real(v.policy_gap);
  st["induced_residual_value"] = json_real(v.induced.residual_value);
  st["induced_residual_dist"] = json_real(v.induced.residual_dist);
  r.stages.push_back(std::move(st));
  r.outputs.write("variational.json", dump(to_json(v)));
  r.summary = "variational: objective=" + fmt("%.15g", v.objective) +
              " iterations=" + std::to_string(v.iterations) + " policy_gap=" + fmt("%.3e", v.policy_gap);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("--config: cannot read '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int execute(Command cmd, const Flags& flags, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();

  std::optional<RunConfig> cfg;
  std::optional<CostModel> model;
  fs::path dir;
  try {
    cfg = parse_config(read_file(flags.config));
    if (flags.seed) cfg->seed = *flags.seed;
    require_for(*cfg, cmd);
    model = build_model(*cfg);
    dir = !flags.out.empty() ? fs::path(flags.out) : cfg->out_dir.empty() ? fs::path(".") : fs::path(cfg->out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!fs::is_directory(dir)) throw ConfigError("--out: cannot create directory '" + dir.string() + "'");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  Outputs outputs(dir);
  Run run{*cfg, *model, outputs, Json::array(), {}, kOk};
  Json manifest;
  manifest["command"] = std::string(to_string(cmd));
  manifest["version"] = DMFG_VERSION;
  manifest["config"] = config_to_json(*cfg);

  std::optional<std::string> error;
  std::optional<std::vector<double>> history;
  try {
    switch (cmd) {
      case Command::stationary: cmd_stationary(run); break;
      case Command::evolve: cmd_evolve(run); break;
      case Command::turnpike: cmd_turnpike(run); break;
      case Command::check: cmd_check(run, out, flags.quiet); break;
      case Command::variational: cmd_variational(run); break;
    }
  } catch (const NonConvergence& e) {
    run.status = kNonConvergence;
    error = e.what();
    history = e.history();
  } catch (const ConfigError& e) {
    run.status = kConfigError;
    error = e.what();
  } catch (const std::exception& e) {
    run.status = kInternal;
    error = e.what();
  }

  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["stages"] = run.stages;
  manifest["outputs"] = outputs.names();
  manifest["exit_status"] = run.status;
  if (error) manifest["error"] = *error;
  if (history) manifest["residual_history"] = to_json(*history);
  if (flags.timing) manifest["wall_time_s"] = seconds;

  try {
    outputs.write("manifest.json", dump(manifest));
    if (run.status == kOk) outputs.commit();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }

  if (error) {
    err << "error: " << *error << '\n';
    if (!run.summary.empty()) err << run.summary << '\n';
  } else if (run.status != kOk) {
    err << run.summary << '\n';
  } else if (!flags.quiet) {
    out << run.summary << " (" << fmt("%.3f", seconds) << " s)\n";
  }
  return run.status;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete-time, finite-state mean field game solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(DMFG_VERSION));

  Flags flags;
  const std::vector<std::pair<Command, const char*>> commands = {
      {Command::stationary, "Stationary solution (pi, V, lambda)"},
      {Command::evolve, "Initial-terminal value problem on a finite horizon"},
      {Command::turnpike, "Horizon sweep against the stationary solution"},
      {Command::check, "Sampled checks of the structural hypotheses"},
      {Command::variational, "Optimal stationary solution from the potential"},
  };
  std::optional<Command> chosen;
  for (const auto& [cmd, help] : commands) {
    CLI::App* sub = app.add_subcommand(std::string(to_string(cmd)), help);
    sub->add_option("--config", flags.config, "JSON run configuration")->required();
    sub->add_option("--seed", flags.seed, "Override the config seed");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_flag("--quiet", flags.quiet, "No summary on stdout");
    sub->add_flag("--timing", flags.timing, "Record wall time in the manifest");
    sub->callback([&chosen, cmd = cmd] { chosen = cmd; });
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << DMFG_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  if (!chosen) return kConfigError;

  try {
    return execute(*chosen, flags, out, err);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace dmfg
