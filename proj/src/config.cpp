#include "dmfg/config.hpp"

#include <cmath>
#include <set>

#include "dmfg/horizon.hpp"

namespace dmfg {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError(path + ": " + msg);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Reads one JSON object, remembering which keys were consumed so that the
/// rest can be reported as unknown.
class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) && !obj_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    if (!has(key)) fail(join(path_, key), "required field is missing");
    return obj_.at(key);
  }

  std::string path(const std::string& key) const { return join(path_, key); }

  double real(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number()) fail(path(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(path(key), "must be finite");
    return x;
  }

  void real(const std::string& key, double& out) {
    if (has(key)) out = real(key);
  }

  long long integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) fail(path(key), "expected an integer");
    if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      fail(path(key), "out of range");
    }
    return v.get<long long>();
  }

  bool boolean(const std::string& key) {
    const json& v = at(key);
    if (!v.is_boolean()) fail(path(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail(path(key), "expected a string");
    return v.get<std::string>();
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.count(it.key())) fail(join(path_, it.key()), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec read_vec(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) fail(path + "[" + std::to_string(i) + "]", "expected a number");
    out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    if (!std::isfinite(out(static_cast<Eigen::Index>(i)))) {
      fail(path + "[" + std::to_string(i) + "]", "must be finite");
    }
  }
  return out;
}

Mat read_mat(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  Mat out;
  for (std::size_t i = 0; i < rows; ++i) {
    const Vec row = read_vec(v[i], path + "[" + std::to_string(i) + "]");
    if (i == 0) out.resize(static_cast<Eigen::Index>(rows), row.size());
    if (row.size() != out.cols()) fail(path, "rows have different lengths");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

std::size_t positive_size(Reader& r, const std::string& key, long long min) {
  const long long n = r.integer(key);
  if (n < min) fail(r.path(key), "must be >= " + std::to_string(min) + " (got " + std::to_string(n) + ")");
  return static_cast<std::size_t>(n);
}

int positive_int(Reader& r, const std::string& key) {
  const long long n = r.integer(key);
  if (n < 1 || n > INT32_MAX) fail(r.path(key), "must be a positive 32-bit integer");
  return static_cast<int>(n);
}

double positive_real(Reader& r, const std::string& key) {
  const double x = r.real(key);
  if (!(x > 0)) fail(r.path(key), "must be > 0");
  return x;
}

ModelType model_type_from(const std::string& name, const std::string& path) {
  if (name == "entropy") return ModelType::entropy;
  if (name == "monotone_w") return ModelType::monotone_w;
  if (name == "theta_example") return ModelType::theta_example;
  if (name == "congestion") return ModelType::congestion;
  if (name == "custom") return ModelType::custom;
  fail(path, "unknown model type '" + name + "'");
}

const char* table_key(ModelType t) {
  switch (t) {
    case ModelType::entropy: return "base";
    case ModelType::monotone_w: return "tilde_c";
    case ModelType::congestion: return "a";
    case ModelType::custom: return "table";
    case ModelType::theta_example: return nullptr;
  }
  return nullptr;
}

ModelConfig read_model(const json& v) {
  Reader r(v, "model");
  ModelConfig m;
  m.type = model_type_from(r.string("type"), "model.type");
  if (const char* key = table_key(m.type); key && r.has(key)) m.table = read_mat(r.at(key), r.path(key));
  switch (m.type) {
    case ModelType::entropy:
      break;
    case ModelType::monotone_w:
      if (r.has("alpha")) m.alpha = positive_real(r, "alpha");
      break;
    case ModelType::theta_example:
      r.real("theta", m.theta);
      if (m.theta < 0 || m.theta > 1) fail("model.theta", "must lie in [0, 1]");
      break;
    case ModelType::congestion:
      if (!m.table) fail("model.a", "required field is missing");
      m.b = read_vec(r.at("b"), "model.b");
      if (r.has("coupling")) {
        const std::string c = r.string("coupling");
        if (c != "origin" && c != "destination") fail("model.coupling", "expected 'origin' or 'destination'");
        m.coupling = congestion_coupling_from_string(c);
      }
      break;
    case ModelType::custom:
      if (!m.table) fail("model.table", "required field is missing");
      if (r.has("entropy")) m.entropy = r.boolean("entropy");
      break;
  }
  r.finish();
  return m;
}

NormKind read_norm(Reader& r, const std::string& key) {
  const std::string s = r.string(key);
  if (s != "sup" && s != "euclid") fail(r.path(key), "expected 'sup' or 'euclid'");
  return norm_kind_from_string(s);
}

SolverConfig read_solver(const json& v) {
  Reader r(v, "solver");
  SolverConfig s;
  if (r.has("method")) {
    const std::string m = r.string("method");
    if (m == "auto") s.method = StationaryMethod::automatic;
    else if (m == "perron") s.method = StationaryMethod::perron;
    else if (m == "generic") s.method = StationaryMethod::generic;
    else fail("solver.method", "expected 'auto', 'perron' or 'generic'");
  }
  if (r.has("tol")) s.tol = positive_real(r, "tol");
  if (r.has("max_iter")) s.max_iter = positive_int(r, "max_iter");
  if (r.has("omega")) {
    s.omega = r.real("omega");
    if (!(s.omega > 0 && s.omega <= 1)) fail("solver.omega", "must lie in (0, 1]");
  }
  if (r.has("omega_floor")) {
    s.omega_floor = r.real("omega_floor");
    if (!(s.omega_floor > 0 && s.omega_floor <= 1)) fail("solver.omega_floor", "must lie in (0, 1]");
  }
  if (r.has("adaptive")) s.adaptive = r.boolean("adaptive");
  if (r.has("perron_tol")) s.perron_tol = positive_real(r, "perron_tol");
  if (r.has("nash_tol")) s.nash_tol = positive_real(r, "nash_tol");
  if (r.has("value_norm")) s.value_norm = read_norm(r, "value_norm");
  if (r.has("f_norm")) s.f_norm = read_norm(r, "f_norm");
  if (r.has("horizon_tol")) s.horizon_tol = positive_real(r, "horizon_tol");
  if (r.has("horizon_max_iter")) s.horizon_max_iter = positive_int(r, "horizon_max_iter");
  r.finish();
  return s;
}

HorizonConfig read_horizon(const json& v) {
  Reader r(v, "horizon");
  HorizonConfig h;
  if (r.has("N")) h.N = positive_size(r, "N", 1);
  if (r.has("Ns")) {
    const json& ns = r.at("Ns");
    if (!ns.is_array() || ns.empty()) fail("horizon.Ns", "expected a non-empty array of integers");
    for (std::size_t k = 0; k < ns.size(); ++k) {
      const std::string p = "horizon.Ns[" + std::to_string(k) + "]";
      if (!ns[k].is_number_integer() || ns[k].get<long long>() < 1) fail(p, "must be an integer >= 1");
      h.Ns.push_back(ns[k].get<std::size_t>());
    }
  }
  if (r.has("from_stationary")) h.from_stationary = r.boolean("from_stationary");
  r.finish();
  return h;
}

DiagnosticsConfig read_diagnostics(const json& v) {
  Reader r(v, "diagnostics");
  DiagnosticsConfig dc;
  if (r.has("samples")) dc.samples = positive_size(r, "samples", 1);
  if (r.has("box_scale")) dc.box_scale = positive_real(r, "box_scale");
  if (r.has("C_est")) dc.C_est = positive_real(r, "C_est");
  r.finish();
  return dc;
}

VariationalConfig read_variational(const json& v) {
  Reader r(v, "variational");
  VariationalConfig vc;
  if (r.has("alpha")) {
    vc.alpha = r.real("alpha");
    if (*vc.alpha < 0) fail("variational.alpha", "must be >= 0");
  }
  if (r.has("tol")) vc.tol = positive_real(r, "tol");
  if (r.has("max_iter")) vc.max_iter = positive_int(r, "max_iter");
  r.finish();
  return vc;
}

void check_dims(const RunConfig& c) {
  const auto d = static_cast<Eigen::Index>(c.d);
  if (c.model.table) {
    const std::string p = std::string("model.") + table_key(c.model.type);
    if (c.model.table->rows() != d || c.model.table->cols() != d) {
      fail(p, "must be " + std::to_string(c.d) + " x " + std::to_string(c.d));
    }
  }
  if (c.model.b && c.model.b->size() != d) fail("model.b", "must have d = " + std::to_string(c.d) + " entries");
  if (c.model.type == ModelType::theta_example && c.d != 2) fail("d", "theta_example requires d = 2");
  if (c.initial_pi) {
    const Vec& p = *c.initial_pi;
    if (p.size() != d) fail("initial_pi", "must have d = " + std::to_string(c.d) + " entries");
    if (p.minCoeff() < 0) fail("initial_pi", "entries must be >= 0");
    if (std::abs(p.sum() - 1.0) > 1e-9) fail("initial_pi", "entries must sum to 1");
  }
  if (c.terminal_V && c.terminal_V->size() != d) {
    fail("terminal_V", "must have d = " + std::to_string(c.d) + " entries");
  }
}

}  // namespace

std::string_view to_string(ModelType t) {
  switch (t) {
    case ModelType::entropy: return "entropy";
    case ModelType::monotone_w: return "monotone_w";
    case ModelType::theta_example: return "theta_example";
    case ModelType::congestion: return "congestion";
    case ModelType::custom: return "custom";
  }
  return "?";
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::stationary: return "stationary";
    case Command::evolve: return "evolve";
    case Command::turnpike: return "turnpike";
    case Command::check: return "check";
    case Command::variational: return "variational";
  }
  return "?";
}

RunConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: not valid JSON (") + e.what() + ")");
  }
  return parse_config_json(doc);
}

RunConfig parse_config_json(const nlohmann::json& doc) {
  Reader r(doc, "");
  RunConfig c;
  c.d = positive_size(r, "d", 2);
  if (r.has("epsilon")) c.epsilon = positive_real(r, "epsilon");
  c.model = read_model(r.at("model"));
  if (r.has("horizon")) c.horizon = read_horizon(r.at("horizon"));
  if (r.has("initial_pi")) c.initial_pi = read_vec(r.at("initial_pi"), "initial_pi");
  if (r.has("terminal_V")) c.terminal_V = read_vec(r.at("terminal_V"), "terminal_V");
  if (r.has("solver")) c.solver = read_solver(r.at("solver"));
  if (r.has("diagnostics")) c.diagnostics = read_diagnostics(r.at("diagnostics"));
  if (r.has("variational")) c.variational = read_variational(r.at("variational"));
  if (r.has("seed")) {
    const json& s = r.at("seed");
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0)) {
      fail("seed", "expected a non-negative integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  if (r.has("output")) {
    Reader o(r.at("output"), "output");
    if (o.has("dir")) c.out_dir = o.string("dir");
    o.finish();
  }
  r.finish();
  check_dims(c);
  return c;
}

Json config_to_json(const RunConfig& c) {
  Json j;
  j["d"] = c.d;
  j["epsilon"] = c.epsilon;

  Json m;
  m["type"] = std::string(to_string(c.model.type));
  if (c.model.table) m[table_key(c.model.type)] = to_json(*c.model.table);
  switch (c.model.type) {
    case ModelType::monotone_w: m["alpha"] = c.model.alpha; break;
    case ModelType::theta_example: m["theta"] = c.model.theta; break;
    case ModelType::congestion:
      m["b"] = to_json(*c.model.b);
      m["coupling"] = std::string(to_string(c.model.coupling));
      break;
    case ModelType::custom: m["entropy"] = c.model.entropy; break;
    case ModelType::entropy: break;
  }
  j["model"] = std::move(m);

  Json h;
  if (c.horizon.N) h["N"] = *c.horizon.N;
  if (!c.horizon.Ns.empty()) h["Ns"] = c.horizon.Ns;
  h["from_stationary"] = c.horizon.from_stationary;
  j["horizon"] = std::move(h);

  if (c.initial_pi) j["initial_pi"] = to_json(*c.initial_pi);
  if (c.terminal_V) j["terminal_V"] = to_json(*c.terminal_V);

  const SolverConfig& s = c.solver;
  Json sj;
  sj["method"] = s.method == StationaryMethod::automatic ? "auto"
                 : s.method == StationaryMethod::perron  ? "perron"
                                                         : "generic";
  sj["tol"] = s.tol;
  sj["max_iter"] = s.max_iter;
  sj["omega"] = s.omega;
  sj["omega_floor"] = s.omega_floor;
  sj["adaptive"] = s.adaptive;
  sj["perron_tol"] = s.perron_tol;
  sj["nash_tol"] = s.nash_tol;
  sj["value_norm"] = std::string(to_string(s.value_norm));
  sj["f_norm"] = std::string(to_string(s.f_norm));
  sj["horizon_tol"] = s.horizon_tol;
  sj["horizon_max_iter"] = s.horizon_max_iter;
  j["solver"] = std::move(sj);

  Json dj;
  dj["samples"] = c.diagnostics.samples;
  dj["box_scale"] = c.diagnostics.box_scale;
  if (c.diagnostics.C_est) dj["C_est"] = *c.diagnostics.C_est;
  j["diagnostics"] = std::move(dj);

  Json vj;
  if (c.variational.alpha) vj["alpha"] = *c.variational.alpha;
  vj["tol"] = c.variational.tol;
  vj["max_iter"] = c.variational.max_iter;
  j["variational"] = std::move(vj);

  j["seed"] = c.seed;
  if (!c.out_dir.empty()) j["output"] = Json{{"dir", c.out_dir}};
  return j;
}

void require_for(const RunConfig& c, Command cmd) {
  const bool needs_data = cmd == Command::evolve || cmd == Command::turnpike;
  if (cmd == Command::evolve && !c.horizon.N) fail("horizon.N", "required by evolve");
  if (cmd == Command::turnpike && c.horizon.Ns.empty()) fail("horizon.Ns", "required by turnpike");
  if (needs_data && !c.horizon.from_stationary) {
    if (!c.initial_pi) fail("initial_pi", "required unless horizon.from_stationary is set");
    if (!c.terminal_V) fail("terminal_V", "required unless horizon.from_stationary is set");
  }
  if (cmd == Command::variational &&
      (c.model.type == ModelType::congestion || c.model.type == ModelType::theta_example)) {
    fail("model.type", "variational needs pi-independent row costs (entropy, monotone_w or custom)");
  }
  if (c.solver.method == StationaryMethod::perron && c.model.type == ModelType::theta_example) {
    fail("solver.method", "perron needs an entropy model");
  }
  if (c.solver.method == StationaryMethod::perron && c.model.type == ModelType::custom && !c.model.entropy) {
    fail("solver.method", "perron needs an entropy model");
  }
}

CostModel build_model(const RunConfig& c) {
  const ModelConfig& m = c.model;
  const auto d = static_cast<Eigen::Index>(c.d);
  const Mat table = m.table ? *m.table : Mat::Zero(d, d);
  try {
    switch (m.type) {
      case ModelType::entropy:
        return entropy_model(entropy_table_spec(table, c.epsilon));
      case ModelType::monotone_w:
        return monotone_w_model(quadratic_monotone_spec(table, m.alpha, c.epsilon));
      case ModelType::theta_example:
        return theta_example_model();
      case ModelType::congestion:
        return congestion_model(CongestionSpec{table, *m.b, c.epsilon, m.coupling});
      case ModelType::custom:
        return m.entropy ? entropy_model(entropy_table_spec(table, c.epsilon), "custom")
                         : constant_table_model(table, "custom");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail("model", e.what());
  }
  fail("model.type", "unsupported");
}

StationaryOptions stationary_options(const RunConfig& c) {
  StationaryOptions o;
  o.tol = c.solver.tol;
  o.max_iter = c.solver.max_iter;
  o.omega = c.solver.omega;
  o.omega_floor = c.solver.omega_floor;
  o.adaptive = c.solver.adaptive;
  o.value_norm = c.solver.value_norm;
  o.perron_tol = c.solver.perron_tol;
  o.nash.tol = c.solver.nash_tol;
  if (c.initial_pi) o.initial_pi = Dist::from_weights(*c.initial_pi);
  if (c.model.type == ModelType::theta_example) {
    if (!o.initial_pi) o.initial_pi = Dist(Vec((Vec(2) << c.model.theta, 1 - c.model.theta).finished()));
    o.initial_V = ValueVec::zero(2);
  }
  return o;
}

HorizonOptions horizon_options(const RunConfig& c) {
  HorizonOptions o;
  o.tol = c.solver.horizon_tol;
  o.max_iter = c.solver.horizon_max_iter;
  o.omega = c.solver.omega;
  o.omega_floor = c.solver.omega_floor;
  o.adaptive = c.solver.adaptive;
  o.nash.tol = c.solver.nash_tol;
  return o;
}

StationarySolution solve_stationary(const RunConfig& c, const CostModel& model) {
  const StationaryOptions o = stationary_options(c);
  const bool perron = c.solver.method == StationaryMethod::perron ||
                      (c.solver.method == StationaryMethod::automatic && model.entropy());
  if (perron) {
    if (!model.entropy()) throw PreconditionError("perron method needs an entropy model");
    return stationary_entropy(*model.entropy(), o);
  }
  return stationary_generic(model, o);
}

}  // namespace dmfg
