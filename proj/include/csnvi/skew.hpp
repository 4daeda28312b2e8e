#pragma once

// Skewness parametrizations (lambda, lambda^3, alpha^3) and the auxiliary
// quantities delta, tau, alpha, kappa derived from lambda.

#include "csnvi/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>

namespace csnvi {

enum class SkewKind { lambda, lambda_cubed, alpha_cubed };

inline std::string_view to_string(SkewKind k) {
  switch (k) {
    case SkewKind::lambda: return "lambda";
    case SkewKind::lambda_cubed: return "lambda-cubed";
    case SkewKind::alpha_cubed: return "alpha-cubed";
  }
  return "?";
}

inline SkewKind skew_kind_from_string(std::string_view s) {
  if (s == "lambda") return SkewKind::lambda;
  if (s == "lambda-cubed" || s == "lambda3") return SkewKind::lambda_cubed;
  if (s == "alpha-cubed" || s == "alpha3") return SkewKind::alpha_cubed;
  throw std::invalid_argument("unknown skew parametrization: " + std::string(s));
}

/// Open bound (1 - b^2)^(-3/2) on |alpha^3|.
inline double alpha_cubed_bound() { return std::pow(kOneMinusB2, -1.5); }

/// Largest |alpha^3| an iterate may take: the open bound shrunk by 1e-6 (relative).
inline double alpha_cubed_limit() { return alpha_cubed_bound() * (1.0 - 1e-6); }

/// Skewness vector tagged with its parametrization.
struct SkewParam {
  SkewKind kind = SkewKind::alpha_cubed;
  Vector value;

  static SkewParam lambda(Vector v) { return {SkewKind::lambda, std::move(v)}; }
  static SkewParam lambda_cubed(Vector v) { return {SkewKind::lambda_cubed, std::move(v)}; }
  static SkewParam alpha_cubed(Vector v) { return {SkewKind::alpha_cubed, std::move(v)}; }

  Index size() const { return value.size(); }
};

struct AuxQuantities {
  Vector delta, tau, alpha, kappa;
};

inline AuxQuantities aux_from_lambda(const Vector& lambda) {
  const Index d = lambda.size();
  AuxQuantities a{Vector(d), Vector(d), Vector(d), Vector(d)};
  for (Index i = 0; i < d; ++i) {
    const double l = lambda(i);
    a.delta(i) = l / std::sqrt(1.0 + l * l);
    a.tau(i) = std::sqrt(1.0 - 2.0 / kPi * a.delta(i) * a.delta(i));
    a.kappa(i) = 1.0 / std::sqrt(1.0 + kOneMinusB2 * l * l);
    a.alpha(i) = l * a.kappa(i);
  }
  return a;
}

inline void check_alpha_cubed(const Vector& a3) {
  const double bound = alpha_cubed_bound();
  for (Index i = 0; i < a3.size(); ++i) {
    if (!(std::abs(a3(i)) < bound))
      throw std::domain_error("alpha^3 component " + std::to_string(i) + " = " + std::to_string(a3(i)) +
                              " outside the admissible range (-" + std::to_string(bound) + ", " +
                              std::to_string(bound) + ")");
  }
}

inline double lambda_from_alpha(double alpha) { return alpha / std::sqrt(1.0 - kOneMinusB2 * alpha * alpha); }

/// lambda for any parametrization; alpha^3 components are range-checked.
inline Vector to_lambda(const SkewParam& s) {
  switch (s.kind) {
    case SkewKind::lambda: return s.value;
    case SkewKind::lambda_cubed: return s.value.unaryExpr([](double x) { return std::cbrt(x); });
    case SkewKind::alpha_cubed:
      check_alpha_cubed(s.value);
      return s.value.unaryExpr([](double x) { return lambda_from_alpha(std::cbrt(x)); });
  }
  throw std::logic_error("unreachable");
}

inline SkewParam from_lambda(const Vector& lambda, SkewKind kind) {
  switch (kind) {
    case SkewKind::lambda: return SkewParam::lambda(lambda);
    case SkewKind::lambda_cubed: return SkewParam::lambda_cubed(lambda.array().cube());
    case SkewKind::alpha_cubed: return SkewParam::alpha_cubed(aux_from_lambda(lambda).alpha.array().cube());
  }
  throw std::logic_error("unreachable");
}

inline SkewParam convert(const SkewParam& s, SkewKind kind) {
  if (s.kind == kind) return s;
  return from_lambda(to_lambda(s), kind);
}

inline AuxQuantities derive_aux(const SkewParam& s) { return aux_from_lambda(to_lambda(s)); }

/// Clamp alpha^3 components into the admissible margin; other kinds pass through.
inline SkewParam clip_to_domain(SkewParam s) {
  if (s.kind == SkewKind::alpha_cubed) {
    const double lim = alpha_cubed_limit();
    s.value = s.value.cwiseMax(-lim).cwiseMin(lim);
  }
  return s;
}

}  // namespace csnvi
