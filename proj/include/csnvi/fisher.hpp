#pragma once

// Dense Fisher information of the augmented density q(theta, w), assembled
// with explicit elimination and commutation matrices. Test-only: the
// assembly is O(d^6), so it is capped at small d.

#include "csnvi/csn.hpp"
#include "csnvi/gradient.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <stdexcept>

namespace csnvi {

inline constexpr Index kFisherOracleMaxDim = 6;

/// E_l vec(X) = vech(X).
inline Matrix elimination_lower(Index d) {
  Matrix e = Matrix::Zero(vech_size(d), d * d);
  Index k = 0;
  for (Index j = 0; j < d; ++j)
    for (Index i = j; i < d; ++i) e(k++, i + j * d) = 1.0;
  return e;
}

/// E_u vec(X) = vech_u(X).
inline Matrix elimination_upper(Index d) {
  Matrix e = Matrix::Zero(vech_u_size(d), d * d);
  Index k = 0;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < j; ++i) e(k++, i + j * d) = 1.0;
  return e;
}

/// E_d vec(X) = diag(X).
inline Matrix elimination_diag(Index d) {
  Matrix e = Matrix::Zero(d, d * d);
  for (Index i = 0; i < d; ++i) e(i, i + i * d) = 1.0;
  return e;
}

/// K vec(X) = vec(X^T).
inline Matrix commutation(Index d) {
  Matrix k = Matrix::Zero(d * d, d * d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) k(j + i * d, i + j * d) = 1.0;
  return k;
}

inline Matrix kron(const Matrix& a, const Matrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

/// I_{theta,w}(eta) with eta = (mu, lambda, vech L[, vech_u U]).
inline Matrix fisher_oracle(const SkewParams& p) {
  const Csn q(p);
  const Index d = q.dim();
  if (d > kFisherOracleMaxDim)
    throw std::invalid_argument("fisher_oracle: dimension " + std::to_string(d) + " exceeds cap " +
                                std::to_string(kFisherOracleMaxDim));
  const auto& ax = q.aux();
  const Matrix& c = q.c();
  const Matrix eye = Matrix::Identity(d, d);
  const Matrix el = elimination_lower(d);
  const Matrix ed = elimination_diag(d);
  const Matrix kc = commutation(d);
  const Vector k2 = ax.kappa.array().square();
  const Matrix c_inv = p.factor.inverse();
  const Matrix c_inv_t = c_inv.transpose();
  const Matrix mid = kc + kron(eye, Matrix(k2.cwiseInverse().asDiagonal()));
  const Matrix ak = ax.alpha.cwiseProduct(ax.kappa).asDiagonal();

  const bool lu = p.factor.kind() == FactorKind::lu;
  const Index nl = vech_size(d);
  const Index nu = lu ? vech_u_size(d) : 0;
  const Index n = 2 * d + nl + nu;
  Matrix fi = Matrix::Zero(n, n);

  fi.block(0, 0, d, d) = (c * k2.asDiagonal() * c.transpose()).inverse();
  fi.block(d, d, d, d) = (kOneMinusB2 * (2.0 * k2.array() - k2.array().square())).matrix().asDiagonal();

  const Matrix u = p.factor.u();
  const Matrix left = kron(u, c_inv_t);  // identity U for Cholesky
  const Matrix i32 = -kOneMinusB2 * el * left * ed.transpose() * ak;
  fi.block(2 * d, d, nl, d) = i32;
  fi.block(d, 2 * d, d, nl) = i32.transpose();
  fi.block(2 * d, 2 * d, nl, nl) = el * left * mid * left.transpose() * el.transpose();

  if (lu) {
    const Matrix eu = elimination_upper(d);
    const Matrix u_inv = u.triangularView<Eigen::UnitUpper>().solve(eye);
    const Matrix lu_block = el * left * mid * kron(eye, u_inv) * eu.transpose();
    fi.block(2 * d, 2 * d + nl, nl, nu) = lu_block;
    fi.block(2 * d + nl, 2 * d, nu, nl) = lu_block.transpose();
    fi.block(2 * d + nl, 2 * d + nl, nu, nu) =
        eu * kron(eye, Matrix(u_inv.transpose() * k2.cwiseInverse().asDiagonal() * u_inv)) * eu.transpose();
  }
  return fi;
}

/// log q(theta, w) where w is the d-vector of normals behind |w| - b.
inline double log_q_joint(const SkewParams& p, const Vector& theta, const Vector& w) {
  const Csn q(p);
  const auto& ax = q.aux();
  const Vector z = p.factor.solve(theta - p.mu);
  const Vector wt = w.cwiseAbs().array() - kB;
  const Index d = q.dim();
  return -d * kLog2Pi - q.log_abs_det() - ax.kappa.array().log().sum() - 0.5 * w.squaredNorm() -
         0.5 * (z.array().square() / ax.kappa.array().square()).sum() -
         0.5 * (wt.array().square() * q.lambda().array().square()).sum() +
         (z.array() * q.lambda().array() / ax.kappa.array() * wt.array()).sum();
}

/// Gradient of log q(theta, w) with respect to eta at fixed (theta, w).
inline ParamGradient score_logq_joint(const SkewParams& p, const Vector& theta, const Vector& w) {
  const Csn q(p);
  const auto& ax = q.aux();
  const Vector& lam = q.lambda();
  const Vector z = p.factor.solve(theta - p.mu);
  const Vector wt = w.cwiseAbs().array() - kB;

  ParamGradient g;
  const Vector inner = (z.array() / ax.kappa.array() - lam.array() * wt.array()) / ax.kappa.array();
  g.d_mu = p.factor.solve_transpose(inner);
  g.d_skew = kOneMinusB2 * ax.alpha.array() * ax.kappa.array() -
             lam.array() * (kOneMinusB2 * z.array().square() + wt.array().square()) +
             (2.0 / ax.kappa.array() - ax.kappa.array()) * z.array() * wt.array();
  const Matrix& l = p.factor.l();
  const Index d = q.dim();
  const Matrix l_inv_t = l.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d)).transpose();
  if (p.factor.kind() == FactorKind::cholesky) {
    g.d_vech_l = vech(g.d_mu * z.transpose() - l_inv_t);
    g.d_vech_u = Vector();
  } else {
    const Matrix u = p.factor.u();
    g.d_vech_l = vech(g.d_mu * (u * z).transpose() - l_inv_t);
    g.d_vech_u = vech_u(l.transpose() * g.d_mu * z.transpose());
  }
  return g;
}

/// I^{-1} grad by dense solve; the reference for the closed forms.
inline ParamGradient natural_grad_oracle(const ParamGradient& g, const SkewParams& p) {
  const Matrix fi = fisher_oracle(p);
  const Vector x = fi.ldlt().solve(g.flatten());
  return ParamGradient::unflatten(x, p.dim(), p.factor.kind());
}

}  // namespace csnvi
