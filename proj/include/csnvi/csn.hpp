#pragma once

// The closed-skew-normal subclass q(theta): theta = mu + C z, where the
// components of z are independent standardized univariate skew normals.
// Density, sampling, entropy, moments, marginals, cumulants and the tilted
// moment identity for exp(s^T theta) q(theta).

#include "csnvi/factor.hpp"
#include "csnvi/linalg.hpp"
#include "csnvi/rng.hpp"
#include "csnvi/skew.hpp"
#include "csnvi/special.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace csnvi {

struct SkewParams {
  Vector mu;
  FactorForm factor;
  SkewParam skew;

  Index dim() const { return mu.size(); }
};

/// Gaussian-equivalent parameters (lambda = 0) in the requested parametrization.
inline SkewParams gaussian_params(Vector mu, FactorForm factor, SkewKind kind = SkewKind::alpha_cubed) {
  const Index d = mu.size();
  return {std::move(mu), std::move(factor), SkewParam{kind, Vector::Zero(d)}};
}

struct CanonicalCsn {
  Vector mu_star;
  Matrix sigma_star;
  Matrix d_star;
};

struct TiltedMoments {
  double log_m = 0.0;
  Vector mean;
  Matrix cov;
};

/// Raised when an operation needs an exact d-variate normal cdf beyond the cap.
class UnsupportedDimension : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr Index kExactMarginalMaxDim = 12;

namespace detail {

// Adaptive Gauss-Kronrod over the effective support of the normal weight.
// A fixed Gauss-Hermite rule loses about 5e-7 at |lambda| = 3 because
// log Phi(lambda u) has complex singularities close to the real axis.
template <typename F>
double normal_expectation(F&& f, double sd) {
  const auto g = [&](double u) { return norm_pdf(u) * f(sd * u); };
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  return Rule::integrate(g, -39.0, 0.0, 20, 1e-15) + Rule::integrate(g, 0.0, 39.0, 20, 1e-15);
}

/// E{Phi(l U) log Phi(l U)}, U ~ N(0, 1). Even in l, so evaluated at |l|.
inline double phi_log_phi_mean(double l) {
  const double a = std::abs(l);
  if (a == 0.0) return 0.5 * std::log(0.5);
  return normal_expectation(
      [a](double u) {
        const double lp = log_norm_cdf(a * u);
        return std::exp(lp) * lp;
      },
      1.0);
}

/// E{U log Phi(l U)}, U ~ N(0, 1/(1 + l^2)). Odd in l.
inline double u_log_phi_mean(double l) {
  const double a = std::abs(l);
  if (a == 0.0) return 0.0;
  const double e = normal_expectation([a](double u) { return u * log_norm_cdf(a * u); }, 1.0 / std::sqrt(1.0 + a * a));
  return l < 0 ? -e : e;
}

}  // namespace detail

/// Validated parameters together with the quantities every operation needs.
class Csn {
 public:
  explicit Csn(SkewParams p) : p_(std::move(p)) {
    const Index d = p_.mu.size();
    if (d < 1) throw std::invalid_argument("csn: dimension must be at least 1");
    if (p_.factor.dim() != d || p_.skew.size() != d) throw std::invalid_argument("csn: block dimensions differ");
    lambda_ = to_lambda(p_.skew);
    aux_ = aux_from_lambda(lambda_);
    c_ = p_.factor.c();
    log_det_ = p_.factor.log_abs_det();
  }

  const SkewParams& params() const { return p_; }
  Index dim() const { return p_.mu.size(); }
  const Vector& mu() const { return p_.mu; }
  const Vector& lambda() const { return lambda_; }
  const AuxQuantities& aux() const { return aux_; }
  const Matrix& c() const { return c_; }
  const FactorForm& factor() const { return p_.factor; }
  double log_abs_det() const { return log_det_; }

  /// v = D_tau C^{-1} (theta - mu) + b delta; v_i are independent SN(0, 1, lambda_i).
  Vector standardized(const Vector& theta) const {
    Vector z = p_.factor.solve(theta - p_.mu);
    return aux_.tau.cwiseProduct(z) + kB * aux_.delta;
  }

  double log_density(const Vector& theta) const {
    check_size(theta);
    const Vector v = standardized(theta);
    const Index d = dim();
    double s = d * kLog2 - 0.5 * d * kLog2Pi - 0.5 * v.squaredNorm() - log_det_;
    for (Index i = 0; i < d; ++i) s += log_norm_cdf(lambda_(i) * v(i)) + std::log(aux_.tau(i));
    return s;
  }

  Vector grad_log_density(const Vector& theta) const {
    check_size(theta);
    const Vector v = standardized(theta);
    Vector inner(dim());
    for (Index i = 0; i < dim(); ++i) inner(i) = aux_.tau(i) * (lambda_(i) * zeta1(lambda_(i) * v(i)) - v(i));
    return p_.factor.solve_transpose(inner);
  }

  /// theta = C (D_kappa w2 + D_alpha (|w1| - b)) + mu.
  Vector transform(const Vector& w1, const Vector& w2) const {
    const Vector wt = w1.cwiseAbs().array() - kB;
    return c_ * (aux_.kappa.cwiseProduct(w2) + aux_.alpha.cwiseProduct(wt)) + p_.mu;
  }

  /// n draws as rows. Each draw consumes d normals for w1 then d for w2.
  Matrix sample(RngStream& rng, Index n) const {
    if (n < 0) throw std::invalid_argument("sample: negative count");
    Matrix out(n, dim());
    for (Index k = 0; k < n; ++k) {
      const Vector w1 = rng.normal_vector(dim());
      const Vector w2 = rng.normal_vector(dim());
      out.row(k) = transform(w1, w2).transpose();
    }
    return out;
  }

  double entropy() const {
    const Index d = dim();
    double s = 0.5 * d * (std::log(kPi / 2.0) + 1.0) + log_det_;
    for (Index i = 0; i < d; ++i) s -= 2.0 * detail::phi_log_phi_mean(lambda_(i)) + std::log(aux_.tau(i));
    return s;
  }

  /// d H / d lambda.
  Vector entropy_grad_lambda() const {
    Vector g(dim());
    for (Index i = 0; i < dim(); ++i) {
      const double l = lambda_(i);
      const double k2 = aux_.kappa(i) * aux_.kappa(i);
      const double sd = 1.0 / std::sqrt(1.0 + l * l);
      g(i) = (2.0 / kPi) * k2 * l / (1.0 + l * l) - kB * detail::u_log_phi_mean(l) * sd;
    }
    return g;
  }

  Matrix covariance() const { return c_ * c_.transpose(); }

  CanonicalCsn canonical() const {
    CanonicalCsn out;
    out.mu_star = p_.mu - kB * c_ * aux_.alpha;
    const Matrix ct = c_ * aux_.tau.cwiseInverse().asDiagonal();
    out.sigma_star = ct * ct.transpose();
    out.d_star = lambda_.cwiseProduct(aux_.tau).asDiagonal() * p_.factor.inverse();
    return out;
  }

  double cgf(const Vector& t) const {
    check_size(t);
    const CanonicalCsn cn = canonical();
    const Vector a = aux_.alpha.cwiseProduct(c_.transpose() * t);
    double s = t.dot(cn.mu_star) + 0.5 * t.dot(cn.sigma_star * t);
    for (Index j = 0; j < dim(); ++j) s += zeta0(a(j));
    return s;
  }

  TiltedMoments tilted_moments(const Vector& s) const {
    check_size(s);
    const CanonicalCsn cn = canonical();
    const Vector a = aux_.alpha.cwiseProduct(c_.transpose() * s);
    TiltedMoments out;
    out.log_m = dim() * kLog2 + s.dot(cn.mu_star) + 0.5 * s.dot(cn.sigma_star * s);
    Vector z1(dim()), z2(dim());
    for (Index j = 0; j < dim(); ++j) {
      out.log_m += log_norm_cdf(a(j));
      z1(j) = zeta1(a(j));
      z2(j) = zeta2(a(j));
    }
    out.mean = cn.mu_star + cn.sigma_star * s + c_ * aux_.alpha.cwiseProduct(z1);
    const Vector scale = aux_.alpha.array().square() * z2.array();
    out.cov = cn.sigma_star + c_ * scale.asDiagonal() * c_.transpose();
    return out;
  }

  /// log q(theta_i) through the d-variate normal cdf; exact for the nonzero
  /// lambda count <= 2, lattice quadrature beyond that.
  double marginal_log_density(Index i, double theta_i) const {
    const Index d = dim();
    if (i < 0 || i >= d) throw std::out_of_range("marginal: coordinate " + std::to_string(i) + " out of range");
    if (d > kExactMarginalMaxDim)
      throw UnsupportedDimension("marginal density needs an exact " + std::to_string(d) +
                                 "-variate normal cdf (cap is " + std::to_string(kExactMarginalMaxDim) +
                                 "); draw samples and use a kernel density estimate instead");
    const Vector bi = aux_.tau.cwiseInverse().cwiseProduct(c_.row(i).transpose());
    const double s_ii = bi.squaredNorm();
    const double mu_i = p_.mu(i) - kB * c_.row(i).dot(aux_.alpha);
    const double x = theta_i - mu_i;
    double out = d * kLog2 - 0.5 * kLog2Pi - 0.5 * std::log(s_ii) - 0.5 * x * x / s_ii;

    // Coordinates with lambda_j = 0 decouple and contribute Phi(0) = 1/2.
    std::vector<Index> active;
    for (Index j = 0; j < d; ++j) {
      if (lambda_(j) != 0.0)
        active.push_back(j);
      else
        out -= kLog2;
    }
    const Index m = static_cast<Index>(active.size());
    if (m == 0) return out;
    Vector upper(m);
    Matrix delta(m, m);
    for (Index a = 0; a < m; ++a) {
      const Index ja = active[a];
      upper(a) = lambda_(ja) * bi(ja) / s_ii * x;
      for (Index b = 0; b < m; ++b) {
        const Index jb = active[b];
        delta(a, b) = (a == b ? 1.0 + lambda_(ja) * lambda_(ja) : 0.0) - lambda_(ja) * lambda_(jb) * bi(ja) * bi(jb) / s_ii;
      }
    }
    return out + std::log(mvn_cdf(upper, delta).value);
  }

  double marginal_skewness(Index i) const {
    if (i < 0 || i >= dim()) throw std::out_of_range("skewness: coordinate out of range");
    double s = 0.0;
    for (Index j = 0; j < dim(); ++j) s += std::pow(aux_.alpha(j) * c_(i, j), 3);
    const double var = c_.row(i).squaredNorm();
    return kB * (2.0 * kB * kB - 1.0) * s / std::pow(var, 1.5);
  }

 private:
  void check_size(const Vector& x) const {
    if (x.size() != dim()) throw std::invalid_argument("csn: argument has wrong dimension");
  }

  SkewParams p_;
  Vector lambda_;
  AuxQuantities aux_;
  Matrix c_;
  double log_det_ = 0.0;
};

// Free-function surface over Csn.

inline double log_density(const SkewParams& p, const Vector& theta) { return Csn(p).log_density(theta); }
inline Vector grad_theta_log_density(const SkewParams& p, const Vector& theta) {
  return Csn(p).grad_log_density(theta);
}
inline Matrix sample(const SkewParams& p, RngStream& rng, Index n) { return Csn(p).sample(rng, n); }
inline double entropy(const SkewParams& p) { return Csn(p).entropy(); }
inline std::pair<Vector, Matrix> mean_cov(const SkewParams& p) { return {p.mu, p.factor.covariance()}; }
inline double cgf(const SkewParams& p, const Vector& t) { return Csn(p).cgf(t); }
inline double marginal_log_density(const SkewParams& p, Index i, double theta_i) {
  return Csn(p).marginal_log_density(i, theta_i);
}
inline double marginal_skewness(const SkewParams& p, Index i) { return Csn(p).marginal_skewness(i); }
inline TiltedMoments tilted_moments(const SkewParams& p, const Vector& s) { return Csn(p).tilted_moments(s); }
inline CanonicalCsn to_canonical(const SkewParams& p) { return Csn(p).canonical(); }

/// log of the CSN_{d,d}(mu*, Sigma*, D*, 0, I) density written in canonical form.
inline double canonical_log_density(const CanonicalCsn& cn, const Vector& theta) {
  const Index d = theta.size();
  Eigen::LLT<Matrix> llt(cn.sigma_star);
  if (llt.info() != Eigen::Success) throw std::runtime_error("canonical: Sigma* not positive definite");
  const Vector r = theta - cn.mu_star;
  const Vector y = llt.matrixL().solve(r);
  const double logdet = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  double s = d * kLog2 - 0.5 * d * kLog2Pi - 0.5 * logdet - 0.5 * y.squaredNorm();
  const Vector dz = cn.d_star * r;
  for (Index i = 0; i < d; ++i) s += log_norm_cdf(dz(i));
  return s;
}

}  // namespace csnvi
