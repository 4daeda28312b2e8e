#pragma once

// Generalized linear mixed model with subject random effects b_i ~ N(0, G^-1),
// G = W W' and W lower triangular. theta = (b_1, ..., b_n, beta, zeta) where
// zeta = vech(W*) and W* equals W with log-transformed diagonal.

#include "csnvi/model.hpp"
#include "csnvi/models/dataset.hpp"
#include "csnvi/models/glm.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace csnvi {

enum class GlmmLink { logit, log };

class GlmmModel final : public TargetModel {
 public:
  GlmmModel(Vector y, Matrix x, Matrix z, std::vector<Index> group, GlmmLink link, double sigma_beta = 10.0,
            double sigma_zeta = 10.0)
      : y_(std::move(y)), x_(std::move(x)), z_(std::move(z)), link_(link), sb2_(sigma_beta * sigma_beta),
        sz2_(sigma_zeta * sigma_zeta) {
    detail::check_design(y_, x_, "glmm");
    detail::check_design(y_, z_, "glmm (random-effect design)");
    if (static_cast<Index>(group.size()) != y_.size()) throw std::invalid_argument("glmm: one group index per row is required");
    ranges_ = group_ranges(group);
    detail::check_counts(y_, "glmm");
    if (link_ == GlmmLink::logit && (y_.array() > 1).any()) throw std::invalid_argument("glmm: logit link needs binary responses");
    n_ = static_cast<Index>(ranges_.size());
    r_ = z_.cols();
    p_ = x_.cols();
    q_ = vech_size(r_);
    c_ = -0.5 * static_cast<double>(n_ * r_) * kLog2Pi - 0.5 * p_ * std::log(2 * kPi * sb2_) -
         0.5 * q_ * std::log(2 * kPi * sz2_);
    if (link_ == GlmmLink::log)
      for (Index i = 0; i < y_.size(); ++i) c_ -= std::lgamma(y_(i) + 1);
  }

  GlmmModel(const Dataset& d, GlmmLink link, double sigma_beta = 10.0, double sigma_zeta = 10.0)
      : GlmmModel(d.y, d.x, d.z, d.group, link, sigma_beta, sigma_zeta) {}

  Index dim() const override { return n_ * r_ + p_ + q_; }
  std::string name() const override { return link_ == GlmmLink::logit ? "glmm-logit" : "glmm-log"; }

  /// The joint has no mode (it grows without bound as W grows and b shrinks),
  /// so the start-up search holds zeta at 0, i.e. W = I.
  std::vector<Index> start_fixed_coordinates() const override {
    std::vector<Index> out;
    for (Index k = dim() - q_; k < dim(); ++k) out.push_back(k);
    return out;
  }

  Index subjects() const { return n_; }
  Index random_dim() const { return r_; }
  Index global_dim() const { return p_ + q_; }

  /// W from zeta: lower triangle of vech_inv with the diagonal exponentiated.
  Matrix w_from_zeta(const Vector& zeta) const {
    Matrix w = vech_inv(zeta);
    w.diagonal() = w.diagonal().array().exp();
    return w;
  }

  double log_joint(const Vector& th) const override {
    const Vector beta = th.segment(n_ * r_, p_);
    const Vector zeta = th.tail(q_);
    const Matrix w = w_from_zeta(zeta);
    double s = c_ + static_cast<double>(n_) * vech_inv(zeta).diagonal().sum() - beta.squaredNorm() / (2 * sb2_) -
               zeta.squaredNorm() / (2 * sz2_);
    for (Index i = 0; i < n_; ++i) {
      const Vector b = th.segment(i * r_, r_);
      s -= 0.5 * (w.transpose() * b).squaredNorm();
      for (Index k = ranges_[i].first; k < ranges_[i].second; ++k) {
        const double eta = x_.row(k).dot(beta) + z_.row(k).dot(b);
        s += y_(k) * eta - cumulant(eta);
      }
    }
    return s;
  }

  Vector grad_log_joint(const Vector& th) const override {
    const Vector beta = th.segment(n_ * r_, p_);
    const Vector zeta = th.tail(q_);
    const Matrix w = w_from_zeta(zeta);
    const Matrix g = w * w.transpose();
    Vector out = Vector::Zero(dim());
    Vector gb = -beta / sb2_;
    Matrix bbw = Matrix::Zero(r_, r_);
    for (Index i = 0; i < n_; ++i) {
      const Vector b = th.segment(i * r_, r_);
      Vector gi = -g * b;
      for (Index k = ranges_[i].first; k < ranges_[i].second; ++k) {
        const double eta = x_.row(k).dot(beta) + z_.row(k).dot(b);
        const double res = y_(k) - mean(eta);
        gi += res * z_.row(k).transpose();
        gb += res * x_.row(k).transpose();
      }
      out.segment(i * r_, r_) = gi;
      bbw += b * (b.transpose() * w);
    }
    out.segment(n_ * r_, p_) = gb;
    // d/dW of the prior quadratic is -sum b b' W; the diagonal picks up dW_jj/dW*_jj = W_jj.
    Matrix dz = -bbw;
    dz.diagonal() = dz.diagonal().cwiseProduct(w.diagonal()).array() + static_cast<double>(n_);
    out.tail(q_) = vech(dz) - zeta / sz2_;
    return out;
  }

 private:
  double cumulant(double eta) const { return link_ == GlmmLink::logit ? detail::log1pexp(eta) : std::exp(eta); }
  double mean(double eta) const { return link_ == GlmmLink::logit ? detail::sigmoid(eta) : std::exp(eta); }

  Vector y_;
  Matrix x_, z_;
  GlmmLink link_;
  double sb2_, sz2_, c_;
  std::vector<std::pair<Index, Index>> ranges_;
  Index n_, r_, p_, q_;
};

}  // namespace csnvi
