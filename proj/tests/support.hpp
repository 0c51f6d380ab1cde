#pragma once

// Shared random generators and brute-force oracles for the test suites.
// Oracles here never call into the solvers they are used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>

#include "dmfg/core.hpp"

namespace dmfg::testing {

using Rng = std::mt19937_64;

inline Vec random_dirichlet(Rng& rng, std::size_t d, double floor = 0.0) {
  std::gamma_distribution<double> g(1.0, 1.0);
  Vec w(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = g(rng) + floor;
  return w / w.sum();
}

inline Dist random_dist(Rng& rng, std::size_t d, double floor = 0.0) {
  return Dist(random_dirichlet(rng, d, floor));
}

inline Dist random_interior_dist(Rng& rng, std::size_t d) { return random_dist(rng, d, 0.05); }

inline StochMatrix random_stoch(Rng& rng, std::size_t d, double floor = 0.0) {
  const auto n = static_cast<Eigen::Index>(d);
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m.row(i) = random_dirichlet(rng, d, floor).transpose();
  return StochMatrix(std::move(m));
}

inline Vec random_vec(Rng& rng, std::size_t d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(static_cast<Eigen::Index>(d));
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = u(rng);
  return v;
}

inline Mat random_mat(Rng& rng, std::size_t d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  const auto n = static_cast<Eigen::Index>(d);
  Mat m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = u(rng);
  return m;
}

struct GridMin {
  Vec argmin;
  double value = std::numeric_limits<double>::infinity();
};

/// Exhaustive search over the d-simplex (d = 2 or 3) on a lattice of the
/// given step.
inline GridMin grid_minimize_simplex(std::size_t d, double step,
                                     const std::function<double(const Vec&)>& f) {
  GridMin best;
  const long n = std::lround(1.0 / step);
  Vec q(static_cast<Eigen::Index>(d));
  if (d == 2) {
    for (long a = 0; a <= n; ++a) {
      q << static_cast<double>(a) / n, static_cast<double>(n - a) / n;
      const double v = f(q);
      if (v < best.value) best = {q, v};
    }
  } else if (d == 3) {
    for (long a = 0; a <= n; ++a) {
      for (long b = 0; a + b <= n; ++b) {
        q << static_cast<double>(a) / n, static_cast<double>(b) / n,
            static_cast<double>(n - a - b) / n;
        const double v = f(q);
        if (v < best.value) best = {q, v};
      }
    }
  }
  return best;
}

/// Entropy row objective sum_j q_j (c_j + eps ln q_j + V_j), 0 ln 0 = 0.
inline double entropy_row_objective(const Vec& q, const Vec& c, const Vec& V, double eps) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (q(j) > 0.0) s += q(j) * (c(j) + eps * std::log(q(j)) + V(j));
  }
  return s;
}

}  // namespace dmfg::testing
