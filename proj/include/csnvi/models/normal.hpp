#pragma once

// Normal observations with unknown mean and log-variance, and the
// variance-only special case with its exact inverse-gamma posterior.

#include "csnvi/csn.hpp"
#include "csnvi/model.hpp"
#include "csnvi/models/dataset.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <stdexcept>

namespace csnvi {

struct NormalPriors {
  double a0 = 0.01;
  double b0 = 0.01;
  double sigma0_sq = 1e4;
};

/// y_i | theta ~ N(theta_1, exp(theta_2)), theta_1 ~ N(0, sigma0^2),
/// exp(theta_2) ~ IG(a0, b0).
class NormalSampleModel final : public TargetModel {
 public:
  NormalSampleModel(Vector y, NormalPriors pr = {}) : y_(std::move(y)), pr_(pr) {
    if (y_.size() == 0) throw std::invalid_argument("normal-sample model needs at least one observation");
    const double n = static_cast<double>(y_.size());
    c_ = pr_.a0 * std::log(pr_.b0) - std::lgamma(pr_.a0) - 0.5 * std::log(pr_.sigma0_sq) - 0.5 * (n + 1) * kLog2Pi;
  }

  Index dim() const override { return 2; }
  std::string name() const override { return "normal-sample"; }
  const Vector& y() const { return y_; }
  const NormalPriors& priors() const { return pr_; }

  double log_joint(const Vector& t) const override {
    const double n = static_cast<double>(y_.size());
    const double ss = (y_.array() - t(0)).square().sum();
    return c_ - (pr_.a0 + 0.5 * n) * t(1) - std::exp(-t(1)) * (pr_.b0 + 0.5 * ss) - t(0) * t(0) / (2 * pr_.sigma0_sq);
  }

  Vector grad_log_joint(const Vector& t) const override {
    const double n = static_cast<double>(y_.size());
    const double e = std::exp(-t(1));
    const Vector r = y_.array() - t(0);
    Vector g(2);
    g(0) = e * r.sum() - t(0) / pr_.sigma0_sq;
    g(1) = -(pr_.a0 + 0.5 * n) + e * (pr_.b0 + 0.5 * r.squaredNorm());
    return g;
  }

  std::optional<double> closed_form_expected_logp(const SkewParams& p) const override {
    const Csn q(p);
    Vector s(2);
    s << 0.0, -1.0;
    const TiltedMoments tm = q.tilted_moments(s);
    const double n = static_cast<double>(y_.size());
    const double t = (y_.array() - tm.mean(0)).square().sum() + n * tm.cov(0, 0);
    const Matrix cov = q.covariance();
    return c_ - (pr_.a0 + 0.5 * n) * p.mu(1) - std::exp(tm.log_m) * (pr_.b0 + 0.5 * t) -
           (cov(0, 0) + p.mu(0) * p.mu(0)) / (2 * pr_.sigma0_sq);
  }

 private:
  Vector y_;
  NormalPriors pr_;
  double c_;
};

/// y_i | theta ~ N(0, exp(theta)), exp(theta) ~ IG(a0, b0).
class NormalVarianceModel final : public TargetModel {
 public:
  NormalVarianceModel(Vector y, NormalPriors pr = {}) : y_(std::move(y)), pr_(pr) {
    if (y_.size() == 0) throw std::invalid_argument("normal-variance model needs at least one observation");
    n_ = static_cast<double>(y_.size());
    shape_ = pr_.a0 + 0.5 * n_;
    rate_ = pr_.b0 + 0.5 * y_.squaredNorm();
    c_ = pr_.a0 * std::log(pr_.b0) - std::lgamma(pr_.a0) - 0.5 * n_ * kLog2Pi;
  }

  Index dim() const override { return 1; }
  std::string name() const override { return "normal-variance"; }

  /// Posterior of exp(theta) is IG(shape, rate).
  double posterior_shape() const { return shape_; }
  double posterior_rate() const { return rate_; }

  double log_joint(const Vector& t) const override { return c_ - shape_ * t(0) - rate_ * std::exp(-t(0)); }

  Vector grad_log_joint(const Vector& t) const override {
    return Vector::Constant(1, -shape_ + rate_ * std::exp(-t(0)));
  }

  std::optional<double> closed_form_expected_logp(const SkewParams& p) const override {
    const TiltedMoments tm = Csn(p).tilted_moments(Vector::Constant(1, -1.0));
    return c_ - shape_ * p.mu(0) - std::exp(tm.log_m) * rate_;
  }

  double log_evidence() const { return c_ + std::lgamma(shape_) - shape_ * std::log(rate_); }

  /// Exact log posterior density of theta = log variance.
  double log_posterior(double theta) const {
    return shape_ * std::log(rate_) - std::lgamma(shape_) - shape_ * theta - rate_ * std::exp(-theta);
  }

  /// The ELBO maximized over mu for fixed (sigma, lambda).
  double profile_elbo(double sigma, double lambda) const {
    const double mu = profile_mean(sigma, lambda);
    Vector m(1), l(1);
    m << mu;
    l << lambda;
    const SkewParams p{m, FactorForm::cholesky(Matrix::Constant(1, 1, sigma)), SkewParam::lambda(l)};
    return c_ - shape_ * (mu + 1.0) + Csn(p).entropy();
  }

  /// argmax over mu of the ELBO at fixed (sigma, lambda). The stationarity
  /// condition is rate * E exp(-theta) = shape, and E exp(-theta) scales as exp(-mu).
  double profile_mean(double sigma, double lambda) const {
    const SkewParams p{Vector::Zero(1), FactorForm::cholesky(Matrix::Constant(1, 1, sigma)),
                       SkewParam::lambda(Vector::Constant(1, lambda))};
    return std::log(rate_ / shape_) + Csn(p).cgf(Vector::Constant(1, -1.0));
  }

 private:
  Vector y_;
  NormalPriors pr_;
  double n_, shape_, rate_, c_;
};

/// Exact posterior of the normal-sample model: theta_1 integrated
/// analytically, theta_2 by adaptive quadrature.
class NormalSamplePosterior {
 public:
  NormalSamplePosterior(Vector y, NormalPriors pr = {}) : y_(std::move(y)), pr_(pr) {
    n_ = static_cast<double>(y_.size());
    ybar_ = n_ > 0 ? y_.mean() : 0.0;
    syy_ = y_.squaredNorm();
    if (y_.size() == 0) return;  // posterior is the (proper) prior; evidence 1
    // Locate the theta_2 mode on a coarse grid, then integrate around it.
    double best = -INFINITY;
    for (double t = -30.0; t <= 40.0; t += 0.01) {
      const double v = log_marginal_unnorm(t);
      if (v > best) best = v, mode2_ = t;
    }
    shift_ = best;
    using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
    const auto f = [this](double t) { return std::exp(log_marginal_unnorm(t) - shift_); };
    const auto [lo, hi] = theta2_range();
    const double z = Rule::integrate(f, lo, mode2_, 20, 1e-14) + Rule::integrate(f, mode2_, hi, 20, 1e-14);
    log_evidence_ = shift_ + std::log(z);
  }

  double log_evidence() const { return log_evidence_; }

  /// Integration window for theta_2 that holds all but a negligible tail.
  std::pair<double, double> theta2_range() const {
    double lo = mode2_, hi = mode2_;
    while (log_marginal_unnorm(lo) - shift_ > -60.0 && lo > -60.0) lo -= 0.25;
    while (log_marginal_unnorm(hi) - shift_ > -60.0 && hi < 80.0) hi += 0.25;
    return {lo, hi};
  }

  /// log p(theta | y).
  double log_density(double t1, double t2) const {
    const double e = std::exp(-t2);
    const double ss = syy_ - 2.0 * t1 * n_ * ybar_ + n_ * t1 * t1;
    const double lj = pr_.a0 * std::log(pr_.b0) - std::lgamma(pr_.a0) - 0.5 * std::log(pr_.sigma0_sq) -
                      0.5 * (n_ + 1) * kLog2Pi - (pr_.a0 + 0.5 * n_) * t2 - e * (pr_.b0 + 0.5 * ss) -
                      t1 * t1 / (2 * pr_.sigma0_sq);
    return lj - log_evidence_;
  }

  struct Grid {
    Vector x1, x2;
    Matrix density;  // rows follow x1, columns x2
  };

  /// Normalized joint posterior on a uniform tensor grid.
  Grid grid(double lo1, double hi1, double lo2, double hi2, Index n1, Index n2) const {
    Grid g{Vector::LinSpaced(n1, lo1, hi1), Vector::LinSpaced(n2, lo2, hi2), Matrix(n1, n2)};
    for (Index i = 0; i < n1; ++i)
      for (Index j = 0; j < n2; ++j) g.density(i, j) = std::exp(log_density(g.x1(i), g.x2(j)));
    return g;
  }

  /// log p(theta_2 | y).
  double log_marginal2(double t2) const { return log_marginal_unnorm(t2) - log_evidence_; }

  /// p(theta_1 | y) by quadrature over theta_2: theta_1 | theta_2, y is normal.
  double marginal1(double t1) const {
    using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
    const auto [lo, hi] = theta2_range();
    const auto f = [&](double t2) {
      const auto [m, v] = conditional1(t2);
      const double r = t1 - m;
      return std::exp(log_marginal2(t2) - 0.5 * std::log(2 * kPi * v) - 0.5 * r * r / v);
    };
    return Rule::integrate(f, lo, mode2_, 20, 1e-12) + Rule::integrate(f, mode2_, hi, 20, 1e-12);
  }

  /// Mean and variance of theta_1 given theta_2.
  std::pair<double, double> conditional1(double t2) const {
    const double e = std::exp(-t2);
    const double v = 1.0 / (n_ * e + 1.0 / pr_.sigma0_sq);
    return {v * n_ * ybar_ * e, v};
  }

 private:
  double log_marginal_unnorm(double t2) const {
    const auto [m, v] = conditional1(t2);
    return pr_.a0 * std::log(pr_.b0) - std::lgamma(pr_.a0) - 0.5 * n_ * kLog2Pi - 0.5 * std::log(pr_.sigma0_sq) +
           m * m / (2 * v) - (pr_.a0 + 0.5 * n_) * t2 - (pr_.b0 + 0.5 * syy_) * std::exp(-t2) + 0.5 * std::log(v);
  }

  Vector y_;
  NormalPriors pr_;
  double n_ = 0, ybar_ = 0, syy_ = 0;
  double mode2_ = 0, shift_ = 0, log_evidence_ = 0;
};

}  // namespace csnvi
