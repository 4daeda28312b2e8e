#pragma once

// Shared helpers for the test suites: random parameter points, finite
// differences and reference quadrature.

#include "csnvi/csn.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <functional>
#include <limits>

namespace csnvi::oracle {

struct ParamSpec {
  Index dim = 2;
  FactorKind factor = FactorKind::cholesky;
  SkewKind skew = SkewKind::lambda;
  double lambda_max = 3.0;
  double lambda_min_abs = 0.0;
};

inline double uniform(RngStream& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

inline SkewParams random_params(RngStream& rng, const ParamSpec& s) {
  const Index d = s.dim;
  Vector mu(d), lam(d);
  for (Index i = 0; i < d; ++i) {
    mu(i) = uniform(rng, -1.0, 1.0);
    const double mag = uniform(rng, s.lambda_min_abs, s.lambda_max);
    lam(i) = rng.uniform() < 0.5 ? -mag : mag;
  }
  Matrix l = Matrix::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    l(j, j) = uniform(rng, 0.5, 1.5);
    for (Index i = j + 1; i < d; ++i) l(i, j) = uniform(rng, -0.5, 0.5);
  }
  FactorForm f;
  if (s.factor == FactorKind::cholesky) {
    f = FactorForm::cholesky(l);
  } else {
    Matrix u = Matrix::Identity(d, d);
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < j; ++i) u(i, j) = uniform(rng, -0.5, 0.5);
    f = FactorForm::lu(l, u);
  }
  return {mu, f, from_lambda(lam, s.skew)};
}

/// Central differences of a scalar function of a vector.
inline Vector finite_diff(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (f(a) - f(b)) / (2.0 * h);
  }
  return g;
}

/// Adaptive Gauss-Kronrod on [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol);
}

/// Univariate SN(xi, omega2, slope) density in the unscaled form
/// 2 phi(x | xi, omega2) Phi(slope (x - xi)).
inline double sn1_log_density(double x, double xi, double omega2, double slope) {
  const double r = x - xi;
  return std::log(2.0) - 0.5 * std::log(2.0 * kPi * omega2) - 0.5 * r * r / omega2 + log_norm_cdf(slope * r);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace csnvi::oracle
