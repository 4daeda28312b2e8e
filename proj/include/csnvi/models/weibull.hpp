#pragma once

// Weibull proportional-hazards survival regression with right censoring.
// Hazard rho t^(rho-1) exp(x'beta) with per-observation shape rho = exp(z'gamma);
// theta = (beta, gamma).

#include "csnvi/model.hpp"
#include "csnvi/models/dataset.hpp"

#include <cmath>
#include <stdexcept>

namespace csnvi {

class WeibullModel final : public TargetModel {
 public:
  WeibullModel(Vector time, Vector event, Matrix x, Matrix z, double sigma0_sq = 100.0)
      : t_(std::move(time)), d_(std::move(event)), x_(std::move(x)), z_(std::move(z)), s0_(sigma0_sq) {
    const Index n = t_.size();
    if (d_.size() != n || x_.rows() != n || z_.rows() != n)
      throw std::invalid_argument("weibull model: times, events and designs must have the same number of rows");
    for (Index i = 0; i < n; ++i) {
      if (!(t_(i) > 0)) throw std::invalid_argument("weibull model: non-positive time at row " + std::to_string(i));
      if (d_(i) != 0 && d_(i) != 1) throw std::invalid_argument("weibull model: event indicator must be 0 or 1");
    }
    log_t_ = t_.array().log();
    c_ = -0.5 * static_cast<double>(dim()) * std::log(2 * kPi * s0_);
  }

  explicit WeibullModel(const Dataset& d, double sigma0_sq = 100.0) : WeibullModel(d.time, d.event, d.x, d.z, sigma0_sq) {}

  Index dim() const override { return x_.cols() + z_.cols(); }
  std::string name() const override { return "weibull"; }

  double log_joint(const Vector& th) const override {
    const Vector eta = x_ * th.head(x_.cols());
    const Vector om = z_ * th.tail(z_.cols());
    double s = c_ - th.squaredNorm() / (2 * s0_);
    for (Index i = 0; i < t_.size(); ++i) {
      const double rho = std::exp(om(i));
      s += d_(i) * (om(i) + (rho - 1.0) * log_t_(i) + eta(i)) - std::exp(eta(i) + rho * log_t_(i));
    }
    return s;
  }

  Vector grad_log_joint(const Vector& th) const override {
    const Vector eta = x_ * th.head(x_.cols());
    const Vector om = z_ * th.tail(z_.cols());
    Vector ge(t_.size()), go(t_.size());
    for (Index i = 0; i < t_.size(); ++i) {
      const double rho = std::exp(om(i));
      const double cum = std::exp(eta(i) + rho * log_t_(i));  // cumulative hazard
      ge(i) = d_(i) - cum;
      go(i) = d_(i) + rho * log_t_(i) * (d_(i) - cum);
    }
    Vector g(dim());
    g.head(x_.cols()) = x_.transpose() * ge;
    g.tail(z_.cols()) = z_.transpose() * go;
    return g - th / s0_;
  }

 private:
  Vector t_, d_, log_t_;
  Matrix x_, z_;
  double s0_, c_;
};

}  // namespace csnvi
