#include "dmfg/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace dmfg {

namespace {

Json real(double x) { return json_real(x); }

Json reals(const std::vector<double>& xs) { return to_json(xs); }

Json fit_json(const std::optional<LogLinearFit>& fit) {
  if (!fit) return nullptr;
  Json j;
  j["slope"] = real(fit->slope);
  j["intercept"] = real(fit->intercept);
  j["r_squared"] = real(fit->r_squared);
  j["points"] = fit->points;
  return j;
}

}  // namespace

Json json_real(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

Json to_json(const std::vector<double>& xs) {
  Json out = Json::array();
  for (double x : xs) out.push_back(json_real(x));
  return out;
}

Json to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(real(v(i)));
  return out;
}

Json to_json(const Mat& m) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vec(m.row(i).transpose())));
  return out;
}

Json to_json(const StationarySolution& s) {
  Json j;
  j["pi_bar"] = to_json(s.pi_bar.vec());
  j["V_bar"] = to_json(s.V_bar.rep().vec());
  j["lambda_bar"] = real(s.lambda_bar);
  j["P_bar"] = to_json(s.P_bar.mat());
  j["residual_value"] = real(s.residual_value);
  j["residual_dist"] = real(s.residual_dist);
  j["iterations"] = s.iterations;
  j["value_norm"] = std::string(to_string(s.value_norm));
  j["history"] = reals(s.history);
  return j;
}

Json to_json(const TurnpikeReport& r) {
  Json j;
  j["Ns"] = r.Ns;
  j["dist_pi"] = reals(r.dist_pi);
  j["dist_V"] = reals(r.dist_V);
  j["residuals"] = reals(r.residuals);
  j["failures"] = r.failures;
  j["f_seq"] = reals(r.f_seq);
  j["fit"] = fit_json(r.fit);
  j["fitted_rate"] = real(r.fitted_rate);
  j["C_est"] = real(r.C_est);
  j["numeros_ok"] = r.numeros_ok;
  j["numeros_premise_ok"] = r.numeros_premise_ok;
  j["burn_in"] = r.burn_in;
  return j;
}

Json to_json(const WorstCase& w) {
  Json j;
  j["check"] = w.check;
  j["ratio"] = real(w.ratio);
  Json pis = Json::array();
  for (const Vec& p : w.pis) pis.push_back(to_json(p));
  Json Vs = Json::array();
  for (const Vec& v : w.Vs) Vs.push_back(to_json(v));
  j["pis"] = std::move(pis);
  j["Vs"] = std::move(Vs);
  return j;
}

Json to_json(const AssumptionReport& r) {
  Json j;
  j["model_id"] = r.model_id;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["gamma_hp8"] = real(r.gamma_hp8);
  j["hp8_failed"] = r.hp8_failed;
  j["gamma_hp10"] = real(r.gamma_hp10);
  j["hp10_failed"] = r.hp10_failed;
  j["C_spread"] = real(r.C_spread);
  j["C_hp6"] = real(r.C_hp6);
  j["K_hp11"] = real(r.K_hp11);
  j["hp3_ok"] = r.hp3_ok;
  j["hp9_ok"] = r.hp9_ok;
  j["kav_ok"] = r.kav_ok;
  j["spread_bound_ok"] = r.spread_bound_ok;
  Json worst = Json::array();
  for (const auto& w : r.worst_cases) worst.push_back(to_json(w));
  j["worst_cases"] = std::move(worst);
  return j;
}

Json to_json(const VariationalResult& r) {
  Json j;
  j["eta"] = to_json(r.eta.mass());
  j["objective"] = real(r.objective);
  j["pi_eta"] = to_json(r.pi_eta.vec());
  j["P_eta"] = to_json(r.P_eta.mat());
  j["zero_rows"] = r.zero_rows;
  j["holonomy_residual"] = real(r.eta.holonomy_residual());
  j["policy_gap"] = real(r.policy_gap);
  j["iterations"] = r.iterations;
  j["induced"] = to_json(r.induced);
  return j;
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  const std::size_t d = t.pis.empty() ? 0 : t.pis.front().size();
  os << "n,state,pi,V";
  for (std::size_t j = 0; j < d; ++j) os << ",P_" << j;
  os << '\n';
  for (std::size_t n = 0; n <= t.N; ++n) {
    for (std::size_t i = 0; i < d; ++i) {
      os << n << ',' << i << ',' << format_real(t.pis[n][i]) << ',' << format_real(t.Vs[n][i]);
      for (std::size_t j = 0; j < d; ++j) {
        os << ',';
        if (n < t.N) os << format_real(t.Ps[n](i, j));
      }
      os << '\n';
    }
  }
}

void write_turnpike_csv(std::ostream& os, const TurnpikeReport& r) {
  os << "N,dist_pi,dist_V,residual,failure\n";
  for (std::size_t k = 0; k < r.Ns.size(); ++k) {
    std::string failure = r.failures[k];
    for (char& c : failure) {
      if (c == ',' || c == '\n' || c == '\r') c = ' ';
    }
    os << r.Ns[k] << ',' << format_real(r.dist_pi[k]) << ',' << format_real(r.dist_V[k]) << ','
       << format_real(r.residuals[k]) << ',' << failure << '\n';
  }
}

void write_assumption_table(std::ostream& os, const AssumptionReport& r) {
  char line[128];
  auto num = [&](const char* name, double value, const char* note) {
    std::snprintf(line, sizeof line, "  %-18s %-22.10g %s\n", name, value, note);
    os << line;
  };
  auto flag = [&](const char* name, bool ok) {
    std::snprintf(line, sizeof line, "  %-18s %s\n", name, ok ? "ok" : "FAILED");
    os << line;
  };
  os << "model " << r.model_id << ", " << r.samples << " samples, seed " << r.seed << '\n';
  num("gamma_hp8", r.gamma_hp8, r.hp8_failed ? "FAILED" : "ok");
  num("gamma_hp10", r.gamma_hp10, r.hp10_failed ? "FAILED" : "ok");
  num("C_spread", r.C_spread, "");
  num("C_hp6", r.C_hp6, "");
  num("K_hp11", r.K_hp11, "");
  flag("hp3", r.hp3_ok);
  flag("hp9", r.hp9_ok);
  flag("kav", r.kav_ok);
  flag("spread_bound", r.spread_bound_ok);
}

}  // namespace dmfg
