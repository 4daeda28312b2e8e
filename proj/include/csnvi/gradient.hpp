#pragma once

// Reparametrization gradient estimates of the ELBO, chain rules between skew
// parametrizations, and closed-form natural gradients for the Cholesky and
// LU factor forms.

#include "csnvi/csn.hpp"
#include "csnvi/model.hpp"

#include <cmath>
#include <stdexcept>

namespace csnvi {

/// Gradient laid out like SkewParams. d_skew is with respect to lambda unless
/// a chain rule has been applied; d_vech_u is empty for the Cholesky form.
struct ParamGradient {
  Vector d_mu;
  Vector d_skew;
  Vector d_vech_l;
  Vector d_vech_u;

  Index size() const { return d_mu.size() + d_skew.size() + d_vech_l.size() + d_vech_u.size(); }

  Vector flatten() const {
    Vector out(size());
    out << d_mu, d_skew, d_vech_l, d_vech_u;
    return out;
  }

  static ParamGradient unflatten(const Vector& x, Index d, FactorKind kind) {
    ParamGradient g;
    const Index nl = vech_size(d);
    const Index nu = kind == FactorKind::lu ? vech_u_size(d) : 0;
    if (x.size() != 2 * d + nl + nu) throw std::invalid_argument("gradient: flat vector has wrong length");
    g.d_mu = x.segment(0, d);
    g.d_skew = x.segment(d, d);
    g.d_vech_l = x.segment(2 * d, nl);
    g.d_vech_u = x.segment(2 * d + nl, nu);
    return g;
  }

  ParamGradient& operator+=(const ParamGradient& o) {
    d_mu += o.d_mu;
    d_skew += o.d_skew;
    d_vech_l += o.d_vech_l;
    d_vech_u += o.d_vech_u;
    return *this;
  }

  ParamGradient& operator*=(double s) {
    d_mu *= s;
    d_skew *= s;
    d_vech_l *= s;
    d_vech_u *= s;
    return *this;
  }

  bool all_finite() const { return flatten().allFinite(); }
};

inline ParamGradient zero_gradient(Index d, FactorKind kind) {
  return {Vector::Zero(d), Vector::Zero(d), Vector::Zero(vech_size(d)),
          Vector::Zero(kind == FactorKind::lu ? vech_u_size(d) : 0)};
}

/// Flatten parameters in the same order as ParamGradient (skew in its own kind).
inline Vector flatten_params(const SkewParams& p) {
  const Vector l = p.factor.vech_l();
  const Vector u = p.factor.vech_u_part();
  Vector out(p.mu.size() + p.skew.size() + l.size() + u.size());
  out << p.mu, p.skew.value, l, u;
  return out;
}

inline SkewParams unflatten_params(const Vector& x, Index d, FactorKind kind, SkewKind skew_kind) {
  const Index nl = vech_size(d);
  const Index nu = kind == FactorKind::lu ? vech_u_size(d) : 0;
  if (x.size() != 2 * d + nl + nu) throw std::invalid_argument("params: flat vector has wrong length");
  return {x.segment(0, d), FactorForm::from_vech(kind, x.segment(2 * d, nl), x.segment(2 * d + nl, nu)),
          SkewParam{skew_kind, x.segment(d, d)}};
}

struct NoisePair {
  Vector w1;
  Vector w2;

  Vector w1_tilde() const { return w1.cwiseAbs().array() - kB; }

  static NoisePair draw(RngStream& rng, Index d) {
    NoisePair n;
    n.w1 = rng.normal_vector(d);
    n.w2 = rng.normal_vector(d);
    return n;
  }
};

inline Vector reparam_draw(const SkewParams& p, const NoisePair& noise) { return Csn(p).transform(noise.w1, noise.w2); }

struct GradientSample {
  ParamGradient grad;  // lambda-space skew block
  double h = 0.0;      // log p(y, theta) - log q(theta)
  Vector theta;
};

/// Chain d h / d theta through theta = mu + C (kappa w2 + alpha w1_tilde) to
/// the parameters; the skew block is in lambda coordinates.
inline ParamGradient pathwise_param_grad(const Csn& q, const Vector& gh, const NoisePair& noise) {
  const auto& ax = q.aux();
  const Vector wt = noise.w1_tilde();
  const Vector z = ax.kappa.cwiseProduct(noise.w2) + ax.alpha.cwiseProduct(wt);
  const Vector ctg = q.c().transpose() * gh;
  const Vector w3 = (wt - kOneMinusB2 * q.lambda().cwiseProduct(noise.w2)).cwiseProduct(ctg);
  ParamGradient g;
  g.d_mu = gh;
  g.d_skew = ax.kappa.array().cube() * w3.array();
  if (q.factor().kind() == FactorKind::cholesky) {
    g.d_vech_l = vech(gh * z.transpose());
    g.d_vech_u = Vector();
  } else {
    const Matrix& u = q.factor().u();
    g.d_vech_l = vech(gh * (u * z).transpose());
    g.d_vech_u = vech_u(q.factor().l().transpose() * gh * z.transpose());
  }
  return g;
}

/// One-draw pathwise estimate with the skew block in lambda coordinates.
inline GradientSample euclidean_grad_sample(const Csn& q, const TargetModel& model, const NoisePair& noise) {
  if (model.dim() != q.dim()) throw std::invalid_argument("gradient: model and family dimensions differ");
  GradientSample out;
  out.theta = q.transform(noise.w1, noise.w2);
  out.h = model.log_joint(out.theta) - q.log_density(out.theta);
  const Vector gh = model.grad_log_joint(out.theta) - q.grad_log_density(out.theta);
  out.grad = pathwise_param_grad(q, gh, noise);
  return out;
}

inline ParamGradient euclidean_grad_estimate(const SkewParams& p, const TargetModel& model, const NoisePair& noise) {
  return euclidean_grad_sample(Csn(p), model, noise).grad;
}

// Chain rules for the skew block. d alpha^3 / d lambda = 3 alpha^2 kappa^3 and
// d lambda^3 / d lambda = 3 lambda^2.

inline Vector alpha_cubed_jacobian(const AuxQuantities& ax) {
  return 3.0 * ax.alpha.array().square() * ax.kappa.array().cube();
}

inline Vector lambda_cubed_jacobian(const Vector& lambda) { return 3.0 * lambda.array().square(); }

inline Vector chain_to_alpha_cubed(const Vector& grad_lambda, const AuxQuantities& ax) {
  for (Index i = 0; i < ax.alpha.size(); ++i)
    if (ax.alpha(i) == 0.0)
      throw std::domain_error("alpha^3 chain rule is singular at alpha_" + std::to_string(i) + " = 0");
  return grad_lambda.array() / alpha_cubed_jacobian(ax).array();
}

inline Vector chain_from_alpha_cubed(const Vector& grad_alpha_cubed, const AuxQuantities& ax) {
  return grad_alpha_cubed.array() * alpha_cubed_jacobian(ax).array();
}

inline Vector chain_to_lambda_cubed(const Vector& grad_lambda, const Vector& lambda) {
  for (Index i = 0; i < lambda.size(); ++i)
    if (lambda(i) == 0.0)
      throw std::domain_error("lambda^3 chain rule is singular at lambda_" + std::to_string(i) + " = 0");
  return grad_lambda.array() / lambda_cubed_jacobian(lambda).array();
}

inline Vector chain_from_lambda_cubed(const Vector& grad_lambda_cubed, const Vector& lambda) {
  return grad_lambda_cubed.array() * lambda_cubed_jacobian(lambda).array();
}

/// Natural gradient in alpha^3 coordinates from the lambda-space natural gradient.
inline Vector natural_chain_alpha_cubed(const Vector& nat_grad_lambda, const AuxQuantities& ax) {
  return nat_grad_lambda.array() * alpha_cubed_jacobian(ax).array();
}

inline Vector natural_chain_lambda_cubed(const Vector& nat_grad_lambda, const Vector& lambda) {
  return nat_grad_lambda.array() * lambda_cubed_jacobian(lambda).array();
}

namespace detail {

inline Vector natural_lambda_base(const Vector& g_lambda, const AuxQuantities& ax) {
  const Vector k2 = ax.kappa.array().square();
  return g_lambda.array() / (kOneMinusB2 * (2.0 * k2.array() - k2.array().square()));
}

}  // namespace detail

/// Inverse Fisher information of q(theta, w) applied to a lambda-space
/// gradient, Cholesky form.
inline ParamGradient natural_grad_cholesky(const ParamGradient& g, const SkewParams& p) {
  if (p.factor.kind() != FactorKind::cholesky) throw std::invalid_argument("natural_grad_cholesky: factor is not Cholesky");
  const Csn q(p);
  const Index d = q.dim();
  const auto& ax = q.aux();
  const Matrix& c = q.c();
  const Vector k2 = ax.kappa.array().square();

  ParamGradient out;
  out.d_mu = c * (k2.asDiagonal() * (c.transpose() * g.d_mu));

  const Matrix gm = lower_part(c.transpose() * vech_inv(g.d_vech_l));
  Matrix weight = k2 * Vector::Ones(d).transpose();
  weight.diagonal() -= 0.5 * k2.cwiseAbs2();
  Matrix a1 = gm.cwiseProduct(weight);
  a1.diagonal() += 0.5 * ax.alpha.cwiseProduct(ax.kappa).cwiseProduct(g.d_skew);

  out.d_skew = detail::natural_lambda_base(g.d_skew, ax) +
               Vector(q.lambda().array() / (2.0 - k2.array()) * a1.diagonal().array());
  out.d_vech_l = vech(c * a1);
  out.d_vech_u = Vector();
  return out;
}

/// Inverse Fisher information of q(theta, w) applied to a lambda-space
/// gradient, LU form.
inline ParamGradient natural_grad_lu(const ParamGradient& g, const SkewParams& p) {
  if (p.factor.kind() != FactorKind::lu) throw std::invalid_argument("natural_grad_lu: factor is not LU");
  const Csn q(p);
  const Index d = q.dim();
  const auto& ax = q.aux();
  const Matrix& c = q.c();
  const Matrix& l = p.factor.l();
  const Matrix u = p.factor.u();
  const Vector k2 = ax.kappa.array().square();
  const Vector lam_w = q.lambda().array() / (2.0 - k2.array());

  // K = kappa^2 1^T, so K(i, j) = kappa_i^2.
  const Matrix kmat = k2 * Vector::Ones(d).transpose();

  Matrix a2 = Matrix::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    a2(j, j) = 1.0 / (1.0 / (2.0 - k2(j)) + 1.0 / k2(j));
    for (Index i = j + 1; i < d; ++i) a2(i, j) = 1.0 / (1.0 / k2(i) - k2(j));
  }

  const Matrix u_inv = u.triangularView<Eigen::UnitUpper>().solve(Matrix::Identity(d, d));
  const Matrix gm = lower_part(l.transpose() * vech_inv(g.d_vech_l));
  const Matrix fm = strict_upper_part(u.transpose() * vech_u_inv(g.d_vech_u, d));

  Matrix inner = u.transpose() * (gm - lower_part(u_inv.transpose() * fm * u.transpose())) * u_inv.transpose();
  inner.diagonal() += lam_w.cwiseProduct(g.d_skew);
  inner -= kmat.cwiseProduct(fm).transpose();
  const Matrix hm = a2.cwiseProduct(inner);
  const Matrix gcal = u * hm * u_inv;

  ParamGradient out;
  out.d_mu = c * (k2.asDiagonal() * (c.transpose() * g.d_mu));
  out.d_skew = detail::natural_lambda_base(g.d_skew, ax) + Vector(lam_w.array() * hm.diagonal().array());
  out.d_vech_l = vech(l * lower_part(gcal));
  out.d_vech_u =
      vech_u(u * strict_upper_part(kmat).cwiseProduct(fm - hm.transpose()) + strict_upper_part(gcal) * u);
  return out;
}

inline ParamGradient natural_grad(const ParamGradient& g, const SkewParams& p) {
  return p.factor.kind() == FactorKind::cholesky ? natural_grad_cholesky(g, p) : natural_grad_lu(g, p);
}

}  // namespace csnvi
