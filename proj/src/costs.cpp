#include "dmfg/costs.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace dmfg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFdStep = 1e-6;

double table_scale(const Mat& m) {
  const double s = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
  return s > 0.0 ? s : 1.0;
}

void require_square(const Mat& m, std::string_view what) {
  if (m.rows() != m.cols() || m.rows() < 2) {
    throw InvalidInput(std::string(what) + ": expected a square table with d >= 2");
  }
  require_finite(Eigen::Map<const Vec>(m.data(), m.size()), what);
}

Vec unit(Eigen::Index n, Eigen::Index k, double scale = 1.0) {
  Vec e = Vec::Zero(n);
  e(k) = scale;
  return e;
}

}  // namespace

void EntropyCostSpec::validate() const {
  if (d < 2) throw InvalidInput("EntropyCostSpec: d must be >= 2");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidInput("EntropyCostSpec: epsilon must be positive and finite");
  }
  if (!base) throw InvalidInput("EntropyCostSpec: missing base cost");
}

EntropyCostSpec entropy_table_spec(Mat base, double epsilon) {
  require_square(base, "entropy base table");
  EntropyCostSpec spec;
  spec.d = static_cast<std::size_t>(base.rows());
  spec.epsilon = epsilon;
  const auto n = base.rows();
  spec.base = [table = std::move(base)](const Vec&) { return table; };
  spec.base_grad = [n](const Vec&, std::size_t, std::size_t) { return Vec::Zero(n).eval(); };
  spec.validate();
  return spec;
}

CostModel::CostModel(std::string id, std::size_t d, CostFlags flags, CostFn eval,
                     double cost_scale)
    : id_(std::move(id)), d_(d), flags_(flags), eval_(std::move(eval)), cost_scale_(cost_scale) {
  if (d_ < 2) throw InvalidInput("CostModel: d must be >= 2");
  if (!eval_) throw InvalidInput("CostModel: missing evaluator");
  if (!(cost_scale_ > 0.0)) cost_scale_ = 1.0;
}

double CostModel::eval(const Vec& pi, const Mat& P, std::size_t i, std::size_t j) const {
  if (i >= d_ || j >= d_) throw InvalidInput("CostModel::eval: index out of range");
  return eval_(pi, P, i, j);
}

double CostModel::summand(const Vec& pi, const Mat& P, std::size_t i, std::size_t j) const {
  const double p = P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  if (p == 0.0) return 0.0;
  return p * eval(pi, P, i, j);
}

Vec CostModel::grad_pi(const Vec& pi, const Mat& P, std::size_t i, std::size_t j) const {
  if (!grad_) throw PreconditionError("CostModel::grad_pi: no analytic gradient for " + id_);
  return grad_(pi, P, i, j);
}

double CostModel::marginal(const Vec& pi, const Mat& P, std::size_t i, std::size_t k) const {
  if (!marginal_) throw PreconditionError("CostModel::marginal: not available for " + id_);
  return marginal_(pi, P, i, k);
}

CostModel& CostModel::set_grad_pi(CostGradFn grad) {
  grad_ = std::move(grad);
  flags_.differentiable_in_pi = static_cast<bool>(grad_);
  return *this;
}

CostModel& CostModel::set_marginal(MarginalFn marginal) {
  marginal_ = std::move(marginal);
  return *this;
}

CostModel& CostModel::set_entropy(EntropyCostSpec spec) {
  spec.validate();
  entropy_ = std::move(spec);
  return *this;
}

double eval_cost(const CostModel& model, const Dist& pi, const StochMatrix& P, std::size_t i,
                 std::size_t j) {
  require_same_size(pi.size(), model.dim(), "eval_cost");
  require_same_size(P.size(), model.dim(), "eval_cost");
  return model.eval(pi.vec(), P.mat(), i, j);
}

Vec cost_grad_pi(const CostModel& model, const Dist& pi, const StochMatrix& P, std::size_t i,
                 std::size_t j) {
  require_same_size(pi.size(), model.dim(), "cost_grad_pi");
  if (model.has_grad_pi()) return model.grad_pi(pi.vec(), P.mat(), i, j);
  const auto n = static_cast<Eigen::Index>(model.dim());
  Vec g(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Vec up = pi.vec() + unit(n, k, kFdStep);
    const Vec down = pi.vec() - unit(n, k, kFdStep);
    g(k) = (model.eval(up, P.mat(), i, j) - model.eval(down, P.mat(), i, j)) / (2.0 * kFdStep);
  }
  return g;
}

CostModel entropy_model(EntropyCostSpec spec, std::string id) {
  spec.validate();
  const double eps = spec.epsilon;
  const auto base = spec.base;
  const Mat probe = base(Dist::uniform(spec.d).vec());
  const double scale = table_scale(probe) + eps;
  CostFlags flags;
  flags.separable = true;
  flags.pi_only = false;
  CostModel model(
      std::move(id), spec.d, flags,
      [base, eps](const Vec& pi, const Mat& P, std::size_t i, std::size_t j) {
        const double p = P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (!(p > 0.0)) return kInf;
        return base(pi)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
               eps * std::log(p);
      },
      scale);
  model.set_marginal([base, eps](const Vec& pi, const Mat& P, std::size_t i, std::size_t k) {
    const double p = P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    if (!(p > 0.0)) return -kInf;
    return base(pi)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) +
           eps * std::log(p) + eps;
  });
  if (spec.base_grad) {
    model.set_grad_pi([g = spec.base_grad](const Vec& pi, const Mat&, std::size_t i,
                                           std::size_t j) { return g(pi, i, j); });
  }
  model.set_entropy(std::move(spec));
  return model;
}

MonotoneWSpec quadratic_monotone_spec(Mat tilde_c, double alpha, double epsilon) {
  if (!(alpha > 0.0)) throw InvalidInput("quadratic monotone model: alpha must be positive");
  require_square(tilde_c, "monotone_w tilde_c");
  MonotoneWSpec spec;
  const auto n = tilde_c.rows();
  spec.W = [alpha](const Vec& pi) { return (alpha * pi).eval(); };
  spec.W_jacobian = [alpha, n](const Vec&) { return (alpha * Mat::Identity(n, n)).eval(); };
  spec.tilde_c = std::move(tilde_c);
  spec.gamma_w = alpha;
  spec.epsilon = epsilon;
  return spec;
}

CostModel monotone_w_model(const MonotoneWSpec& spec, std::string id) {
  require_square(spec.tilde_c, "monotone_w tilde_c");
  if (!spec.W) throw InvalidInput("monotone_w: missing W");
  if (spec.epsilon < 0.0) throw InvalidInput("monotone_w: epsilon must be >= 0");
  const auto n = spec.tilde_c.rows();
  const auto d = static_cast<std::size_t>(n);
  const Mat tilde = spec.tilde_c;
  const auto W = spec.W;
  const auto jac = spec.W_jacobian;
  const double scale = table_scale(tilde) + 1.0;

  if (spec.epsilon > 0.0) {
    EntropyCostSpec es;
    es.d = d;
    es.epsilon = spec.epsilon;
    es.base = [W, tilde](const Vec& pi) {
      Mat b = tilde;
      b.colwise() += W(pi);
      return b;
    };
    if (jac) {
      es.base_grad = [jac](const Vec& pi, std::size_t i, std::size_t) {
        return Vec(jac(pi).row(static_cast<Eigen::Index>(i)).transpose());
      };
    }
    return entropy_model(std::move(es), std::move(id));
  }

  CostFlags flags;
  flags.pi_only = true;
  CostModel model(
      std::move(id), d, flags,
      [W, tilde](const Vec& pi, const Mat&, std::size_t i, std::size_t j) {
        const auto ii = static_cast<Eigen::Index>(i);
        return W(pi)(ii) + tilde(ii, static_cast<Eigen::Index>(j));
      },
      scale);
  if (jac) {
    model.set_grad_pi([jac](const Vec& pi, const Mat&, std::size_t i, std::size_t) {
      return Vec(jac(pi).row(static_cast<Eigen::Index>(i)).transpose());
    });
  }
  return model;
}

CostModel theta_example_model() {
  CostFlags flags;
  flags.pi_only = true;
  CostModel model(
      "theta_example", 2, flags,
      [](const Vec& pi, const Mat&, std::size_t i, std::size_t j) {
        return i == j ? pi(0) : 100.0;
      },
      100.0);
  model.set_grad_pi([](const Vec&, const Mat&, std::size_t i, std::size_t j) {
    Vec g = Vec::Zero(2);
    if (i == j) g(0) = 1.0;
    return g;
  });
  return model;
}

std::string_view to_string(CongestionCoupling c) {
  return c == CongestionCoupling::origin ? "origin" : "destination";
}

CongestionCoupling congestion_coupling_from_string(std::string_view name) {
  if (name == "origin") return CongestionCoupling::origin;
  if (name == "destination") return CongestionCoupling::destination;
  throw InvalidInput("unknown congestion coupling '" + std::string(name) +
                     "' (expected origin or destination)");
}

CostModel congestion_model(const CongestionSpec& spec, std::string id) {
  require_square(spec.a, "congestion a");
  const auto n = spec.a.rows();
  if (spec.b.size() != n) throw DimensionMismatch("congestion: b has wrong length");
  require_finite(spec.b, "congestion b");
  if ((spec.b.array() < 0.0).any()) throw InvalidInput("congestion: b must be nonnegative");
  if (spec.epsilon < 0.0) throw InvalidInput("congestion: epsilon must be >= 0");
  const Mat a = spec.a;
  const Vec b = spec.b;
  const bool origin = spec.coupling == CongestionCoupling::origin;
  const auto d = static_cast<std::size_t>(n);

  auto base = [a, b, origin](const Vec& pi) {
    Mat t = a;
    if (origin) {
      t.colwise() += b.cwiseProduct(pi);
    } else {
      t.rowwise() += b.cwiseProduct(pi).transpose();
    }
    return t;
  };
  auto grad = [b, origin, n](const Vec&, std::size_t i, std::size_t j) {
    const auto k = static_cast<Eigen::Index>(origin ? i : j);
    return unit(n, k, b(k));
  };

  if (spec.epsilon > 0.0) {
    EntropyCostSpec es;
    es.d = d;
    es.epsilon = spec.epsilon;
    es.base = base;
    es.base_grad = grad;
    return entropy_model(std::move(es), std::move(id));
  }
  CostFlags flags;
  flags.pi_only = true;
  CostModel model(
      std::move(id), d, flags,
      [base](const Vec& pi, const Mat&, std::size_t i, std::size_t j) {
        return base(pi)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      },
      table_scale(a) + (b.size() ? b.maxCoeff() : 0.0));
  model.set_grad_pi([grad](const Vec& pi, const Mat&, std::size_t i, std::size_t j) {
    return grad(pi, i, j);
  });
  return model;
}

CostModel constant_table_model(Mat c, std::string id) {
  require_square(c, "constant table");
  const auto n = c.rows();
  const double scale = table_scale(c);
  CostFlags flags;
  flags.pi_only = true;
  CostModel model(
      std::move(id), static_cast<std::size_t>(n), flags,
      [c = std::move(c)](const Vec&, const Mat&, std::size_t i, std::size_t j) {
        return c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      },
      scale);
  model.set_grad_pi(
      [n](const Vec&, const Mat&, std::size_t, std::size_t) { return Vec::Zero(n).eval(); });
  return model;
}

CostModel quadratic_row_model(Mat a, double kappa, Vec w, std::string id) {
  require_square(a, "quadratic_row a");
  if (!(kappa > 0.0)) throw InvalidInput("quadratic_row: kappa must be positive");
  const auto n = a.rows();
  if (w.size() != n) throw DimensionMismatch("quadratic_row: w has wrong length");
  const double scale = table_scale(a) + kappa + (w.size() ? w.cwiseAbs().maxCoeff() : 0.0);
  auto cost = [a, kappa, w](const Vec& pi, const Mat& P, std::size_t i, std::size_t j) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    return a(ii, jj) + kappa * P(ii, jj) + w(ii) * pi(ii);
  };
  CostModel model(std::move(id), static_cast<std::size_t>(n), CostFlags{}, cost, scale);
  model.set_marginal([cost, kappa](const Vec& pi, const Mat& P, std::size_t i, std::size_t k) {
    return cost(pi, P, i, k) +
           kappa * P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  });
  model.set_grad_pi([w, n](const Vec&, const Mat&, std::size_t i, std::size_t) {
    const auto ii = static_cast<Eigen::Index>(i);
    return unit(n, ii, w(ii));
  });
  return model;
}

CostModel flow_congestion_model(Mat a, double kappa, double sigma, std::string id) {
  require_square(a, "flow_congestion a");
  if (!(kappa > 0.0) || sigma < 0.0) {
    throw InvalidInput("flow_congestion: need kappa > 0 and sigma >= 0");
  }
  const auto n = a.rows();
  const double scale = table_scale(a) + kappa + sigma * static_cast<double>(n);
  auto cost = [a, kappa, sigma](const Vec&, const Mat& P, std::size_t i, std::size_t j) {
    const auto ii = static_cast<Eigen::Index>(i);
    const auto jj = static_cast<Eigen::Index>(j);
    return a(ii, jj) + kappa * P(ii, jj) + sigma * P.col(jj).sum();
  };
  CostFlags flags;
  flags.separable = false;
  CostModel model(std::move(id), static_cast<std::size_t>(n), flags, cost, scale);
  model.set_marginal(
      [cost, kappa, sigma](const Vec& pi, const Mat& P, std::size_t i, std::size_t k) {
        return cost(pi, P, i, k) +
               (kappa + sigma) * P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      });
  model.set_grad_pi(
      [n](const Vec&, const Mat&, std::size_t, std::size_t) { return Vec::Zero(n).eval(); });
  return model;
}

VariationalObjective quadratic_objective(double alpha) {
  if (alpha < 0.0) throw InvalidInput("quadratic objective: alpha must be >= 0");
  VariationalObjective obj;
  obj.f = [alpha](const Vec& pi) { return 0.5 * alpha * pi.squaredNorm(); };
  obj.grad_f = [alpha](const Vec& pi) { return (alpha * pi).eval(); };
  return obj;
}

}  // namespace dmfg
