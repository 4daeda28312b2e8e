#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace csnvi {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// sqrt(2/pi), the mean of a standard half-normal variate.
inline const double kB = std::sqrt(2.0 / 3.14159265358979323846);
/// 1 - b^2, the variance of a standard half-normal variate.
inline const double kOneMinusB2 = 1.0 - 2.0 / 3.14159265358979323846;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLog2 = 0.69314718055994530942;
inline constexpr double kLog2Pi = 1.83787706640934548356;

inline Index vech_size(Index d) { return d * (d + 1) / 2; }
inline Index vech_u_size(Index d) { return d * (d - 1) / 2; }

/// Lower-triangular entries (diagonal included), columnwise left to right.
inline Vector vech(const Matrix& x) {
  const Index d = x.rows();
  Vector out(vech_size(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j)
    for (Index i = j; i < d; ++i) out(k++) = x(i, j);
  return out;
}

/// Strictly upper-triangular entries, columnwise left to right.
inline Vector vech_u(const Matrix& x) {
  const Index d = x.rows();
  Vector out(vech_u_size(d));
  Index k = 0;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < j; ++i) out(k++) = x(i, j);
  return out;
}

inline Index dim_from_vech(Index n) {
  const Index d = static_cast<Index>((std::sqrt(8.0 * static_cast<double>(n) + 1.0) - 1.0) / 2.0 + 0.5);
  if (vech_size(d) != n) throw std::invalid_argument("vech length is not triangular");
  return d;
}

inline Matrix vech_inv(const Vector& s) {
  const Index d = dim_from_vech(s.size());
  Matrix out = Matrix::Zero(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j)
    for (Index i = j; i < d; ++i) out(i, j) = s(k++);
  return out;
}

inline Matrix vech_u_inv(const Vector& t, Index d) {
  if (t.size() != vech_u_size(d)) throw std::invalid_argument("vech_u length mismatch");
  Matrix out = Matrix::Zero(d, d);
  Index k = 0;
  for (Index j = 0; j < d; ++j)
    for (Index i = 0; i < j; ++i) out(i, j) = t(k++);
  return out;
}

/// X_l: entries above the diagonal set to zero.
inline Matrix lower_part(const Matrix& x) { return x.triangularView<Eigen::Lower>(); }

/// X_u: entries on and below the diagonal set to zero.
inline Matrix strict_upper_part(const Matrix& x) { return x.triangularView<Eigen::StrictlyUpper>(); }

/// dg(X): off-diagonal entries set to zero.
inline Matrix dg(const Matrix& x) { return x.diagonal().asDiagonal(); }

}  // namespace csnvi
