#pragma once

// Poisson regression with exposure offsets and binomial logistic regression,
// both with an isotropic Gaussian prior on the coefficients.

#include "csnvi/csn.hpp"
#include "csnvi/model.hpp"
#include "csnvi/models/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace csnvi {

namespace detail {

inline void check_design(const Vector& y, const Matrix& x, const char* what) {
  if (x.rows() != y.size())
    throw std::invalid_argument(std::string(what) + ": design has " + std::to_string(x.rows()) + " rows but " +
                                std::to_string(y.size()) + " responses");
  if (x.cols() == 0) throw std::invalid_argument(std::string(what) + ": empty design");
}

inline void check_counts(const Vector& y, const char* what) {
  for (Index i = 0; i < y.size(); ++i)
    if (!(y(i) >= 0) || y(i) != std::floor(y(i)))
      throw std::invalid_argument(std::string(what) + ": response " + std::to_string(i) + " is not a non-negative count");
}

inline double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace detail

/// y_i ~ Poisson(T_i exp(x_i' theta)), theta ~ N(0, sigma0^2 I).
class PoissonGlmModel final : public TargetModel {
 public:
  PoissonGlmModel(Vector y, Matrix x, Vector exposure = {}, double sigma0_sq = 100.0)
      : y_(std::move(y)), x_(std::move(x)), t_(std::move(exposure)), s0_(sigma0_sq) {
    detail::check_design(y_, x_, "poisson model");
    detail::check_counts(y_, "poisson model");
    if (t_.size() == 0) t_ = Vector::Ones(y_.size());
    if (t_.size() != y_.size() || (t_.array() <= 0).any())
      throw std::invalid_argument("poisson model: exposures must be positive, one per response");
    const double d = static_cast<double>(x_.cols());
    c_ = -0.5 * d * std::log(2 * kPi * s0_);
    for (Index i = 0; i < y_.size(); ++i) c_ += y_(i) * std::log(t_(i)) - std::lgamma(y_(i) + 1);
  }

  explicit PoissonGlmModel(const Dataset& d, double sigma0_sq = 100.0) : PoissonGlmModel(d.y, d.x, d.offset, sigma0_sq) {}

  Index dim() const override { return x_.cols(); }
  std::string name() const override { return "poisson-glm"; }

  double log_joint(const Vector& th) const override {
    const Vector eta = x_ * th;
    return c_ + y_.dot(eta) - (t_.array() * eta.array().exp()).sum() - th.squaredNorm() / (2 * s0_);
  }

  Vector grad_log_joint(const Vector& th) const override {
    const Vector r = y_.array() - t_.array() * (x_ * th).array().exp();
    return x_.transpose() * r - th / s0_;
  }

  std::optional<double> closed_form_expected_logp(const SkewParams& p) const override {
    const Csn q(p);
    const Matrix cov = q.covariance();
    double rate = 0.0;
    for (Index i = 0; i < y_.size(); ++i) rate += t_(i) * std::exp(q.cgf(x_.row(i).transpose()));
    return c_ + y_.dot(x_ * p.mu) - rate - (cov.trace() + p.mu.squaredNorm()) / (2 * s0_);
  }

 private:
  Vector y_;
  Matrix x_;
  Vector t_;
  double s0_, c_;
};

/// y_i ~ Binomial(n_i, logistic(x_i' theta)), theta ~ N(0, sigma0^2 I).
class LogisticModel final : public TargetModel {
 public:
  LogisticModel(Vector y, Matrix x, Vector n_trials = {}, double sigma0_sq = 100.0)
      : y_(std::move(y)), x_(std::move(x)), n_(std::move(n_trials)), s0_(sigma0_sq) {
    detail::check_design(y_, x_, "logistic model");
    detail::check_counts(y_, "logistic model");
    if (n_.size() == 0) n_ = Vector::Ones(y_.size());
    if (n_.size() != y_.size() || (n_.array() < y_.array()).any())
      throw std::invalid_argument("logistic model: trial counts must cover the responses");
    const double d = static_cast<double>(x_.cols());
    c_ = -0.5 * d * std::log(2 * kPi * s0_);
    for (Index i = 0; i < y_.size(); ++i)
      c_ += std::lgamma(n_(i) + 1) - std::lgamma(y_(i) + 1) - std::lgamma(n_(i) - y_(i) + 1);
  }

  explicit LogisticModel(const Dataset& d, double sigma0_sq = 100.0) : LogisticModel(d.y, d.x, d.n_trials, sigma0_sq) {}

  Index dim() const override { return x_.cols(); }
  std::string name() const override { return "logistic"; }

  double log_joint(const Vector& th) const override {
    const Vector eta = x_ * th;
    double s = c_ + y_.dot(eta) - th.squaredNorm() / (2 * s0_);
    for (Index i = 0; i < eta.size(); ++i) s -= n_(i) * detail::log1pexp(eta(i));
    return s;
  }

  Vector grad_log_joint(const Vector& th) const override {
    const Vector eta = x_ * th;
    Vector r(eta.size());
    for (Index i = 0; i < eta.size(); ++i) r(i) = y_(i) - n_(i) * detail::sigmoid(eta(i));
    return x_.transpose() * r - th / s0_;
  }

 private:
  Vector y_;
  Matrix x_;
  Vector n_;
  double s0_, c_;
};

}  // namespace csnvi
