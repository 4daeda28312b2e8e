#pragma once

// Zero-inflated negative binomial regression. theta = (beta, gamma, log alpha):
// beta drives the count mean exp(x'beta), gamma the logit of the structural-zero
// probability, alpha is the NB dispersion (variance mu + alpha mu^2).

#include "csnvi/model.hpp"
#include "csnvi/models/dataset.hpp"
#include "csnvi/models/glm.hpp"
#include "csnvi/special.hpp"

#include <cmath>
#include <stdexcept>

namespace csnvi {

class ZinbModel final : public TargetModel {
 public:
  ZinbModel(Vector y, Matrix x, Matrix z, double sigma0_sq = 100.0)
      : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)), s0_(sigma0_sq) {
    detail::check_design(y_, x_, "zinb model");
    detail::check_design(y_, z_, "zinb model (zero-inflation design)");
    for (Index i = 0; i < y_.size(); ++i)
      if (y_(i) < 0) throw std::invalid_argument("zinb model: negative count at row " + std::to_string(i));
    detail::check_counts(y_, "zinb model");
    c_ = -0.5 * static_cast<double>(dim()) * std::log(2 * kPi * s0_);
    for (Index i = 0; i < y_.size(); ++i) c_ -= std::lgamma(y_(i) + 1);
  }

  explicit ZinbModel(const Dataset& d, double sigma0_sq = 100.0) : ZinbModel(d.y, d.x, d.z, sigma0_sq) {}

  Index dim() const override { return x_.cols() + z_.cols() + 1; }
  std::string name() const override { return "zinb"; }

  double log_joint(const Vector& th) const override {
    const auto [beta, gamma, la] = split(th);
    const double a = std::exp(la), r = 1.0 / a;
    const Vector eta = x_ * beta, om = z_ * gamma;
    double s = c_ - th.squaredNorm() / (2 * s0_);
    for (Index i = 0; i < y_.size(); ++i) {
      const double mu = std::exp(eta(i));
      const double ls = std::log1p(a * mu);
      if (y_(i) == 0) {
        s += logaddexp(om(i), -r * ls) - detail::log1pexp(om(i));
      } else {
        const double y = y_(i);
        s += -detail::log1pexp(om(i)) + std::lgamma(y + r) - std::lgamma(r) - r * ls + y * (la + eta(i) - ls);
      }
    }
    return s;
  }

  Vector grad_log_joint(const Vector& th) const override {
    const auto [beta, gamma, la] = split(th);
    const double a = std::exp(la), r = 1.0 / a;
    const Vector eta = x_ * beta, om = z_ * gamma;
    Vector d_eta(y_.size()), d_om(y_.size());
    double d_la = 0.0;
    for (Index i = 0; i < y_.size(); ++i) {
      const double mu = std::exp(eta(i));
      const double sp = 1.0 + a * mu;
      const double ls = std::log1p(a * mu);
      if (y_(i) == 0) {
        const double l0 = logaddexp(om(i), -r * ls);
        const double p0 = std::exp(-r * ls - l0);  // share of the NB zero in the mixture
        d_eta(i) = -(mu / sp) * p0;
        d_om(i) = std::exp(om(i) - l0) - detail::sigmoid(om(i));
        d_la += p0 * (r * ls - mu / sp);
      } else {
        const double y = y_(i);
        d_eta(i) = y - (a * y + 1.0) * mu / sp;
        d_om(i) = -detail::sigmoid(om(i));
        d_la += r * (digamma(r) - digamma(y + r) + ls) + (y - mu) / sp;
      }
    }
    Vector g(dim());
    g.head(x_.cols()) = x_.transpose() * d_eta;
    g.segment(x_.cols(), z_.cols()) = z_.transpose() * d_om;
    g(dim() - 1) = d_la;
    return g - th / s0_;
  }

 private:
  static double logaddexp(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
  }

  std::tuple<Vector, Vector, double> split(const Vector& th) const {
    return {th.head(x_.cols()), th.segment(x_.cols(), z_.cols()), th(dim() - 1)};
  }

  Vector y_;
  Matrix x_, z_;
  double s0_, c_;
};

}  // namespace csnvi
