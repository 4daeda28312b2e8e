#pragma once

#include "csnvi/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace csnvi {

enum class FactorKind { cholesky, lu };

inline std::string_view to_string(FactorKind k) { return k == FactorKind::cholesky ? "cholesky" : "lu"; }

inline FactorKind factor_kind_from_string(std::string_view s) {
  if (s == "cholesky") return FactorKind::cholesky;
  if (s == "lu") return FactorKind::lu;
  throw std::invalid_argument("unknown factor form: " + std::string(s));
}

/// Linear map C with Sigma = C C^T, either C = L (lower triangular) or
/// C = L U with U unit upper triangular. Diagonal entries of L may be
/// negative; only |L_ii| > 0 is required.
class FactorForm {
 public:
  FactorForm() = default;

  static FactorForm cholesky(Matrix l) { return FactorForm(FactorKind::cholesky, std::move(l), Matrix()); }

  static FactorForm lu(Matrix l, Matrix u) { return FactorForm(FactorKind::lu, std::move(l), std::move(u)); }

  /// Rebuild from packed blocks: vech(L) and, for LU, vech_u(U).
  static FactorForm from_vech(FactorKind kind, const Vector& vech_l, const Vector& vech_u_part = Vector()) {
    Matrix l = vech_inv(vech_l);
    if (kind == FactorKind::cholesky) return cholesky(std::move(l));
    Matrix u = vech_u_inv(vech_u_part, l.rows());
    u.diagonal().setOnes();
    return lu(std::move(l), std::move(u));
  }

  FactorKind kind() const { return kind_; }
  Index dim() const { return l_.rows(); }
  const Matrix& l() const { return l_; }
  /// U for the LU form; identity for Cholesky.
  Matrix u() const { return kind_ == FactorKind::lu ? u_ : Matrix::Identity(dim(), dim()); }

  Matrix c() const { return kind_ == FactorKind::lu ? Matrix(l_ * u_) : l_; }

  Matrix covariance() const {
    const Matrix cm = c();
    return cm * cm.transpose();
  }

  /// log|det C| = sum log|L_ii|; U contributes nothing.
  double log_abs_det() const { return l_.diagonal().array().abs().log().sum(); }

  /// C^{-1} x by triangular solves.
  Vector solve(const Vector& x) const {
    Vector y = l_.triangularView<Eigen::Lower>().solve(x);
    if (kind_ == FactorKind::lu) y = u_.triangularView<Eigen::UnitUpper>().solve(y);
    return y;
  }

  /// C^{-T} x.
  Vector solve_transpose(const Vector& x) const {
    Vector y = x;
    if (kind_ == FactorKind::lu) y = u_.transpose().triangularView<Eigen::UnitLower>().solve(y);
    return l_.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  Matrix inverse() const { return solve_matrix(Matrix::Identity(dim(), dim())); }

  Matrix solve_matrix(const Matrix& x) const {
    Matrix y = l_.triangularView<Eigen::Lower>().solve(x);
    if (kind_ == FactorKind::lu) y = u_.triangularView<Eigen::UnitUpper>().solve(y);
    return y;
  }

  Vector vech_l() const { return vech(l_); }
  Vector vech_u_part() const { return kind_ == FactorKind::lu ? vech_u(u_) : Vector(); }

 private:
  FactorForm(FactorKind kind, Matrix l, Matrix u) : kind_(kind), l_(std::move(l)), u_(std::move(u)) { validate(); }

  void validate() const {
    const Index d = l_.rows();
    if (d < 1 || l_.cols() != d) throw std::invalid_argument("factor: L must be square with d >= 1");
    for (Index j = 0; j < d; ++j)
      for (Index i = 0; i < j; ++i)
        if (l_(i, j) != 0.0) throw std::invalid_argument("factor: L must be lower triangular");
    for (Index i = 0; i < d; ++i)
      if (!(std::abs(l_(i, i)) > 0.0) || !std::isfinite(l_(i, i)))
        throw std::runtime_error("factor: singular L (diagonal entry " + std::to_string(i) + " is zero)");
    if (kind_ == FactorKind::lu) {
      if (u_.rows() != d || u_.cols() != d) throw std::invalid_argument("factor: U dimension mismatch");
      for (Index i = 0; i < d; ++i) {
        if (u_(i, i) != 1.0) throw std::invalid_argument("factor: U must have unit diagonal");
        for (Index j = 0; j < i; ++j)
          if (u_(i, j) != 0.0) throw std::invalid_argument("factor: U must be upper triangular");
      }
    }
  }

  FactorKind kind_ = FactorKind::cholesky;
  Matrix l_;
  Matrix u_;
};

}  // namespace csnvi
