#pragma once

// Basic numeric objects of a finite-state mean field game: probability
// vectors, value vectors modulo constants, and row-stochastic matrices.

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dmfg/errors.hpp"

namespace dmfg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Entries in [-kSimplexTol, 0) are clamped to zero; sums are renormalized.
inline constexpr double kSimplexTol = 1e-12;
/// Largest deviation of the input sum from 1 that construction will absorb
/// by renormalization. Anything further off is rejected.
inline constexpr double kSumSlack = 1e-9;

enum class NormKind { sup, euclid };

std::string_view to_string(NormKind kind);
NormKind norm_kind_from_string(std::string_view name);

/// Probability vector on d >= 2 states.
class Dist {
 public:
  explicit Dist(Vec entries);

  static Dist uniform(std::size_t d);
  /// Normalizes an arbitrary nonnegative weight vector with positive sum.
  static Dist from_weights(const Vec& weights);

  std::size_t size() const noexcept { return static_cast<std::size_t>(p_.size()); }
  double operator[](std::size_t i) const { return p_(static_cast<Eigen::Index>(i)); }
  const Vec& vec() const noexcept { return p_; }

 private:
  Vec p_;
};

/// Expected cost-to-go per state. Any finite vector.
class ValueVec {
 public:
  explicit ValueVec(Vec entries);
  static ValueVec zero(std::size_t d) { return ValueVec(Vec::Zero(static_cast<Eigen::Index>(d))); }

  std::size_t size() const noexcept { return static_cast<std::size_t>(v_.size()); }
  double operator[](std::size_t i) const { return v_(static_cast<Eigen::Index>(i)); }
  const Vec& vec() const noexcept { return v_; }

 private:
  Vec v_;
};

/// Element of R^d / R, stored as its mean-zero representative.
class ValueClass {
 public:
  explicit ValueClass(const ValueVec& v);

  const ValueVec& rep() const noexcept { return rep_; }
  std::size_t size() const noexcept { return rep_.size(); }

 private:
  ValueVec rep_;
};

/// d x d row-stochastic matrix; every row satisfies the Dist invariants.
class StochMatrix {
 public:
  explicit StochMatrix(Mat rows);

  static StochMatrix identity(std::size_t d);
  static StochMatrix uniform(std::size_t d);
  static StochMatrix from_rows(const std::vector<Dist>& rows);

  std::size_t size() const noexcept { return static_cast<std::size_t>(m_.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return m_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  Dist row(std::size_t i) const;
  const Mat& mat() const noexcept { return m_; }

  /// Copy with row i replaced by q (the matrix P(P, q, i)).
  StochMatrix with_row(std::size_t i, const Dist& q) const;
  /// Copy with row i' overwritten by row i, all other rows untouched.
  StochMatrix row_replaced(std::size_t i, std::size_t i_prime) const;

 private:
  Mat m_;
};

/// Joint probability mass on state pairs (i, j).
class EdgeMeasure {
 public:
  explicit EdgeMeasure(Mat mass);

  const Mat& mass() const noexcept { return mass_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(mass_.rows()); }
  /// Max over states of |row sum - column sum|.
  double holonomy_residual() const noexcept { return holonomy_residual_; }
  bool is_stationary(double tol) const noexcept { return holonomy_residual_ <= tol; }

  /// Row marginal pi_i = sum_j eta_ij.
  Vec marginal() const { return mass_.rowwise().sum(); }

 private:
  Mat mass_;
  double holonomy_residual_;
};

/// inf over scalar shifts of ||v + lambda * 1||.
double sharp_norm(const ValueVec& v, NormKind kind = NormKind::sup);
double sharp_norm(const Vec& v, NormKind kind = NormKind::sup);

/// Plain (non-quotient) norm of a vector.
double vec_norm(const Vec& v, NormKind kind);

/// Euclidean distance between distributions.
double dist_distance(const Dist& a, const Dist& b);

/// (pi P)_j = sum_i pi_i P_ij.
Dist push_forward(const Dist& pi, const StochMatrix& P);

/// Euclidean projection of an arbitrary finite vector onto the probability
/// simplex of the same dimension (any dimension >= 1).
Vec simplex_projection(const Vec& x);

/// Euclidean projection onto the simplex, returned as a Dist.
Dist project_simplex(const Vec& x);

/// Throws InvalidInput unless every entry is finite.
void require_finite(const Vec& x, std::string_view what);
void require_same_size(std::size_t a, std::size_t b, std::string_view what);

}  // namespace dmfg
