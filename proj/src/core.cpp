#include "dmfg/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dmfg {

std::string_view to_string(NormKind kind) {
  return kind == NormKind::sup ? "sup" : "euclid";
}

NormKind norm_kind_from_string(std::string_view name) {
  if (name == "sup") return NormKind::sup;
  if (name == "euclid") return NormKind::euclid;
  throw InvalidInput("unknown norm kind '" + std::string(name) + "' (expected sup or euclid)");
}

void require_finite(const Vec& x, std::string_view what) {
  if (!x.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

void require_same_size(std::size_t a, std::size_t b, std::string_view what) {
  if (a != b) {
    throw DimensionMismatch(std::string(what) + ": size " + std::to_string(a) + " vs " +
                            std::to_string(b));
  }
}

namespace {

Vec normalize_simplex_entries(Vec p, std::string_view what) {
  if (p.size() < 2) throw InvalidInput(std::string(what) + ": need at least 2 states");
  require_finite(p, what);
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p(k) < -kSimplexTol) {
      throw InvalidInput(std::string(what) + ": negative entry " + std::to_string(p(k)));
    }
    if (p(k) < 0.0) p(k) = 0.0;
  }
  const double s = p.sum();
  if (std::abs(s - 1.0) > kSumSlack) {
    throw InvalidInput(std::string(what) + ": entries sum to " + std::to_string(s));
  }
  p /= s;
  return p;
}

}  // namespace

Dist::Dist(Vec entries) : p_(normalize_simplex_entries(std::move(entries), "Dist")) {}

Dist Dist::uniform(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return Dist(Vec::Constant(n, 1.0 / static_cast<double>(d)));
}

Dist Dist::from_weights(const Vec& weights) {
  require_finite(weights, "Dist::from_weights");
  if ((weights.array() < 0.0).any()) throw InvalidInput("Dist::from_weights: negative weight");
  const double s = weights.sum();
  if (!(s > 0.0)) throw InvalidInput("Dist::from_weights: weights sum to zero");
  return Dist(weights / s);
}

ValueVec::ValueVec(Vec entries) : v_(std::move(entries)) { require_finite(v_, "ValueVec"); }

ValueClass::ValueClass(const ValueVec& v)
    : rep_(ValueVec((v.vec().array() - v.vec().mean()).matrix())) {}

StochMatrix::StochMatrix(Mat rows) : m_(std::move(rows)) {
  if (m_.rows() != m_.cols()) throw DimensionMismatch("StochMatrix: not square");
  for (Eigen::Index i = 0; i < m_.rows(); ++i) {
    m_.row(i) = normalize_simplex_entries(m_.row(i).transpose(), "StochMatrix row").transpose();
  }
}

StochMatrix StochMatrix::identity(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return StochMatrix(Mat::Identity(n, n));
}

StochMatrix StochMatrix::uniform(std::size_t d) {
  const auto n = static_cast<Eigen::Index>(d);
  return StochMatrix(Mat::Constant(n, n, 1.0 / static_cast<double>(d)));
}

StochMatrix StochMatrix::from_rows(const std::vector<Dist>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    require_same_size(rows[static_cast<std::size_t>(i)].size(), rows.size(), "StochMatrix::from_rows");
    m.row(i) = rows[static_cast<std::size_t>(i)].vec().transpose();
  }
  return StochMatrix(std::move(m));
}

Dist StochMatrix::row(std::size_t i) const {
  return Dist(m_.row(static_cast<Eigen::Index>(i)).transpose());
}

StochMatrix StochMatrix::with_row(std::size_t i, const Dist& q) const {
  require_same_size(q.size(), size(), "StochMatrix::with_row");
  StochMatrix out = *this;
  out.m_.row(static_cast<Eigen::Index>(i)) = q.vec().transpose();
  return out;
}

StochMatrix StochMatrix::row_replaced(std::size_t i, std::size_t i_prime) const {
  StochMatrix out = *this;
  out.m_.row(static_cast<Eigen::Index>(i_prime)) = m_.row(static_cast<Eigen::Index>(i));
  return out;
}

EdgeMeasure::EdgeMeasure(Mat mass) : mass_(std::move(mass)), holonomy_residual_(0.0) {
  if (mass_.rows() != mass_.cols()) throw DimensionMismatch("EdgeMeasure: not square");
  if (!mass_.allFinite()) throw InvalidInput("EdgeMeasure: non-finite entry");
  if ((mass_.array() < -kSimplexTol).any()) throw InvalidInput("EdgeMeasure: negative mass");
  mass_ = mass_.cwiseMax(0.0);
  const double total = mass_.sum();
  if (std::abs(total - 1.0) > kSumSlack) {
    throw InvalidInput("EdgeMeasure: total mass " + std::to_string(total));
  }
  mass_ /= total;
  const Vec rows = mass_.rowwise().sum();
  const Vec cols = mass_.colwise().sum().transpose();
  holonomy_residual_ = (rows - cols).cwiseAbs().maxCoeff();
}

double sharp_norm(const Vec& v, NormKind kind) {
  require_finite(v, "sharp_norm");
  if (v.size() == 0) return 0.0;
  if (kind == NormKind::sup) return 0.5 * (v.maxCoeff() - v.minCoeff());
  return (v.array() - v.mean()).matrix().norm();
}

double sharp_norm(const ValueVec& v, NormKind kind) { return sharp_norm(v.vec(), kind); }

double vec_norm(const Vec& v, NormKind kind) {
  return kind == NormKind::sup ? v.cwiseAbs().maxCoeff() : v.norm();
}

double dist_distance(const Dist& a, const Dist& b) {
  require_same_size(a.size(), b.size(), "dist_distance");
  return (a.vec() - b.vec()).norm();
}

Dist push_forward(const Dist& pi, const StochMatrix& P) {
  require_same_size(pi.size(), P.size(), "push_forward");
  Vec next = P.mat().transpose() * pi.vec();
  // Rounding can leave a tiny negative or a sum a few ulps off; Dist absorbs it.
  return Dist(std::move(next));
}

Vec simplex_projection(const Vec& x) {
  require_finite(x, "simplex_projection");
  const auto n = x.size();
  if (n == 0) throw InvalidInput("simplex_projection: empty vector");
  std::vector<double> u(x.data(), x.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    cumulative += u[static_cast<std::size_t>(k)];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[static_cast<std::size_t>(k)] - t > 0.0) theta = t;
  }
  return (x.array() - theta).cwiseMax(0.0).matrix();
}

Dist project_simplex(const Vec& x) {
  Vec p = simplex_projection(x);
  // Re-normalize away the last few ulps of rounding in the threshold.
  p /= p.sum();
  return Dist(std::move(p));
}

}  // namespace dmfg
