#pragma once

// Scalar special functions: normal pdf/cdf in log space, the zeta_r family
// (derivatives of log 2*Phi), digamma, Gauss-Hermite rules and normal
// distribution functions in two and more dimensions.

#include "csnvi/linalg.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <stdexcept>
#include <vector>

namespace csnvi {

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x - 0.5 * kLog2Pi); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double norm_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

namespace detail {

// Upper-tail Mills ratio (1 - Phi(t)) / phi(t) by backward continued fraction.
// Only used for large t, where 60 terms are far more than enough.
inline double mills_ratio_cf(double t) {
  double f = t;
  for (int k = 60; k >= 1; --k) f = t + k / f;
  return 1.0 / f;
}

inline constexpr double kTailSwitch = -25.0;

}  // namespace detail

/// log Phi(x), finite for all finite x.
inline double log_norm_cdf(double x) {
  if (x > 5.0) return std::log1p(-0.5 * std::erfc(x / std::sqrt(2.0)));
  if (x > detail::kTailSwitch) return std::log(0.5 * std::erfc(-x / std::sqrt(2.0)));
  return -0.5 * x * x - 0.5 * kLog2Pi + std::log(detail::mills_ratio_cf(-x));
}

/// zeta_0(x) = log(2 Phi(x)).
inline double zeta0(double x) { return kLog2 + log_norm_cdf(x); }

/// zeta_1(x) = phi(x) / Phi(x).
inline double zeta1(double x) {
  if (x > detail::kTailSwitch) return norm_pdf(x) / norm_cdf(x);
  return 1.0 / detail::mills_ratio_cf(-x);
}

/// zeta_2(x) = -zeta_1(x) (x + zeta_1(x)).
inline double zeta2(double x) {
  const double z1 = zeta1(x);
  return -z1 * (x + z1);
}

inline double zeta(int r, double x) {
  switch (r) {
    case 0: return zeta0(x);
    case 1: return zeta1(x);
    case 2: return zeta2(x);
    default: throw std::invalid_argument("zeta: order must be 0, 1 or 2");
  }
}

inline Vector zeta(int r, const Vector& x) {
  Vector out(x.size());
  for (Index i = 0; i < x.size(); ++i) out(i) = zeta(r, x(i));
  return out;
}

/// Digamma for x > 0 (reflection otherwise). Recurrence up to x >= 10 then
/// the asymptotic series; relative error below 1e-13 away from the poles.
inline double digamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x < 0.0) return digamma(1.0 - x) - kPi / std::tan(kPi * x);
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double r = 1.0 / (x * x);
  const double series =
      r * (1.0 / 12 - r * (1.0 / 120 - r * (1.0 / 252 - r * (1.0 / 240 - r * (1.0 / 132 - r * 691.0 / 32760)))));
  return acc + std::log(x) - 0.5 / x - series;
}

/// Gauss-Hermite rule for the weight exp(-x^2).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// E f(U), U ~ N(0, sd^2).
  template <typename F>
  double expect_normal(F&& f, double sd = 1.0) const {
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(std::sqrt(2.0) * sd * nodes[i]);
    return s / std::sqrt(kPi);
  }
};

inline GaussHermiteRule make_gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("Gauss-Hermite order must be positive");
  GaussHermiteRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const double pim4 = 0.7511255444649425;  // pi^(-1/4)
  const int m = (n + 1) / 2;
  double z = 0.0, pp = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * rule.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * rule.nodes[1];
    else
      z = 2.0 * z - rule.nodes[i - 2];
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = rule.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  return rule;
}

/// Shared 64-node rule used by the entropy and its gradient.
inline const GaussHermiteRule& gauss_hermite_64() {
  static const GaussHermiteRule rule = make_gauss_hermite(64);
  return rule;
}

/// P(X > h, Y > k) for a standard bivariate normal with correlation r
/// (Drezner-Wesolowsky with Genz's Gauss-Legendre refinements).
inline double bvn_upper(double h, double k, double r) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (h == inf || k == inf) return 0.0;
  if (h == -inf) return k == -inf ? 1.0 : norm_cdf(-k);
  if (k == -inf) return norm_cdf(-h);
  if (r == 0.0) return norm_cdf(-h) * norm_cdf(-k);

  static constexpr std::array<double, 3> w6{0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static constexpr std::array<double, 3> x6{0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static constexpr std::array<double, 6> w12{0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                             0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
  static constexpr std::array<double, 6> x12{0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                             0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  static constexpr std::array<double, 10> w20{0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                              0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                              0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                              0.1527533871307259};
  static constexpr std::array<double, 10> x20{0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                              0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                              0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                              0.07652652113349733};
  std::vector<double> w, x;
  auto load = [&](const auto& ww, const auto& xx) {
    for (std::size_t i = 0; i < ww.size(); ++i) {
      w.push_back(ww[i]);
      x.push_back(1.0 - xx[i]);
    }
    for (std::size_t i = 0; i < ww.size(); ++i) {
      w.push_back(ww[i]);
      x.push_back(1.0 + xx[i]);
    }
  };
  if (std::abs(r) < 0.3)
    load(w6, x6);
  else if (std::abs(r) < 0.75)
    load(w12, x12);
  else
    load(w20, x20);

  const double tp = 2.0 * kPi;
  double hk = h * k;
  double bvn = 0.0;
  if (std::abs(r) < 0.925) {
    const double hs = (h * h + k * k) / 2.0;
    const double asr = std::asin(r) / 2.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sn = std::sin(asr * x[i]);
      bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
    }
    bvn = bvn * asr / tp + norm_cdf(-h) * norm_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (std::abs(r) < 1.0) {
      const double as = 1.0 - r * r;
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      double asr = -(bs / as + hk) / 2.0;
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 80.0;
      if (asr > -100.0) bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(tp) * norm_cdf(-b / a);
        bvn -= std::exp(-hk / 2.0) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
      }
      a /= 2.0;
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double xs = (a * x[i]) * (a * x[i]);
        asr = -(bs / xs + hk) / 2.0;
        if (asr <= -100.0) continue;
        const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
        const double rs = std::sqrt(1.0 - xs);
        const double ep = std::exp(-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
        acc += w[i] * std::exp(asr) * (sp - ep);
      }
      bvn = (a * acc - bvn) / tp;
    }
    if (r > 0.0) {
      bvn += norm_cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double l = h < 0.0 ? norm_cdf(k) - norm_cdf(h) : norm_cdf(-h) - norm_cdf(-k);
      bvn = l - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

/// P(X <= h, Y <= k) for a standard bivariate normal with correlation r.
inline double bvn_cdf(double h, double k, double r) { return bvn_upper(-h, -k, r); }

struct MvnResult {
  double value = 0.0;
  double error = 0.0;
};

struct MvnOptions {
  int points_per_shift = 4001;
  int shifts = 8;
  std::uint64_t seed = 0x5eed5eedULL;
};

/// P(X <= upper) for X ~ N(0, cov). Exact for d <= 2; otherwise Genz's
/// separation-of-variables integrand on a randomly shifted Richtmyer lattice
/// with a fixed seed, so results are deterministic. `error` is three standard
/// errors across shifts.
inline MvnResult mvn_cdf(const Vector& upper, const Matrix& cov, const MvnOptions& opt = {}) {
  const Index d = upper.size();
  if (cov.rows() != d || cov.cols() != d) throw std::invalid_argument("mvn_cdf: dimension mismatch");
  if (d == 0) return {1.0, 0.0};
  if (d == 1) return {norm_cdf(upper(0) / std::sqrt(cov(0, 0))), 0.0};
  if (d == 2) {
    const double s0 = std::sqrt(cov(0, 0)), s1 = std::sqrt(cov(1, 1));
    return {bvn_cdf(upper(0) / s0, upper(1) / s1, cov(0, 1) / (s0 * s1)), 0.0};
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw std::runtime_error("mvn_cdf: covariance is not positive definite");
  const Matrix c = llt.matrixL();

  static constexpr std::array<int, 24> primes{2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37,
                                              41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89};
  if (d - 1 > static_cast<Index>(primes.size())) throw std::invalid_argument("mvn_cdf: dimension too large");
  std::vector<double> gen(d - 1);
  for (Index j = 0; j < d - 1; ++j) gen[j] = std::fmod(std::sqrt(static_cast<double>(primes[j])), 1.0);

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double e1 = norm_cdf(upper(0) / c(0, 0));
  std::vector<double> y(d), shift(d - 1);
  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < opt.shifts; ++s) {
    for (auto& v : shift) v = unif(rng);
    double acc = 0.0;
    for (int k = 1; k <= opt.points_per_shift; ++k) {
      double e = e1, f = e1;
      for (Index i = 1; i < d; ++i) {
        double u = std::fmod(k * gen[i - 1] + shift[i - 1], 1.0);
        u = std::abs(2.0 * u - 1.0);  // baker's transform
        const double p = std::clamp(u * e, 1e-300, 1.0 - 1e-16);
        y[i - 1] = norm_quantile(p);
        double t = upper(i);
        for (Index j = 0; j < i; ++j) t -= c(i, j) * y[j];
        e = norm_cdf(t / c(i, i));
        f *= e;
        if (f == 0.0) break;
      }
      acc += f;
    }
    const double est = acc / opt.points_per_shift;
    const double delta = est - mean;
    mean += delta / (s + 1);
    m2 += delta * (est - mean);
  }
  const double se = opt.shifts > 1 ? std::sqrt(m2 / (opt.shifts - 1) / opt.shifts) : 0.0;
  return {mean, 3.0 * se};
}

}  // namespace csnvi
