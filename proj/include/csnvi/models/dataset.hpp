#pragma once

#include "csnvi/linalg.hpp"
#include "csnvi/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace csnvi {

/// Observed data for any of the built-in model families. Unused fields stay empty.
struct Dataset {
  Vector y;                   // responses (counts, binary, continuous)
  Vector n_trials;            // binomial trial counts
  Matrix x;                   // fixed-effect covariates, one row per observation
  Matrix z;                   // second design (zero-inflation, shape, random effects)
  Vector offset;              // exposure T_i (not its log)
  Vector time;                // survival times
  Vector event;               // 1 = observed, 0 = censored
  std::vector<Index> group;   // subject index per observation, contiguous

  Index size() const { return y.size() > 0 ? y.size() : time.size(); }
};

/// Subject boundaries [start, end) from a contiguous group vector.
inline std::vector<std::pair<Index, Index>> group_ranges(const std::vector<Index>& group) {
  std::vector<std::pair<Index, Index>> out;
  const Index n = static_cast<Index>(group.size());
  Index start = 0;
  for (Index k = 1; k <= n; ++k) {
    if (k == n || group[k] != group[k - 1]) {
      const Index id = group[start];
      if (id != static_cast<Index>(out.size()))
        throw std::invalid_argument("groups must be contiguous and numbered 0, 1, ... in order (subject " +
                                    std::to_string(id) + " at row " + std::to_string(start) + ")");
      out.emplace_back(start, k);
      start = k;
    }
  }
  return out;
}

namespace synthetic {

/// y_i ~ N(theta1, exp(theta2)).
inline Dataset normal_sample(std::uint64_t seed, Index n = 6, double mean = 100.0, double variance = 225.0) {
  RngStream rng(seed);
  Dataset d;
  d.y = mean + std::sqrt(variance) * rng.normal_vector(n).array();
  return d;
}

/// y_i ~ N(0, exp(theta)).
inline Dataset normal_variance(std::uint64_t seed, Index n = 6, double variance = 225.0) {
  return normal_sample(seed, n, 0.0, variance);
}

/// Intercept plus standard-normal covariates; binary or binomial responses.
inline Dataset logistic(std::uint64_t seed, Index n, const Vector& beta, int trials = 1) {
  RngStream rng(seed);
  Dataset d;
  const Index p = beta.size();
  d.x = Matrix::Ones(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 1; j < p; ++j) d.x(i, j) = rng.normal();
  d.n_trials = Vector::Constant(n, trials);
  d.y = Vector::Zero(n);
  const Vector eta = d.x * beta;
  for (Index i = 0; i < n; ++i) {
    const double pr = 1.0 / (1.0 + std::exp(-eta(i)));
    for (int t = 0; t < trials; ++t) d.y(i) += rng.uniform() < pr ? 1.0 : 0.0;
  }
  return d;
}

/// Poisson counts with exposure offsets.
inline Dataset poisson(std::uint64_t seed, Index n, const Vector& beta) {
  RngStream rng(seed);
  Dataset d;
  const Index p = beta.size();
  d.x = Matrix::Ones(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 1; j < p; ++j) d.x(i, j) = rng.normal() * 0.5;
  d.offset = Vector(n);
  d.y = Vector(n);
  for (Index i = 0; i < n; ++i) {
    d.offset(i) = 1.0 + 4.0 * rng.uniform();
    std::poisson_distribution<long> pois(d.offset(i) * std::exp(d.x.row(i).dot(beta)));
    d.y(i) = static_cast<double>(pois(rng.engine()));
  }
  return d;
}

/// Zero-inflated negative binomial; x and z share an intercept plus one covariate.
inline Dataset zinb(std::uint64_t seed, Index n, const Vector& beta, const Vector& gamma, double dispersion) {
  RngStream rng(seed);
  Dataset d;
  d.x = Matrix::Ones(n, beta.size());
  d.z = Matrix::Ones(n, gamma.size());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 1; j < beta.size(); ++j) d.x(i, j) = rng.normal() * 0.5;
    for (Index j = 1; j < gamma.size(); ++j) d.z(i, j) = rng.normal() * 0.5;
  }
  d.y = Vector(n);
  for (Index i = 0; i < n; ++i) {
    const double pi0 = 1.0 / (1.0 + std::exp(-d.z.row(i).dot(gamma)));
    if (rng.uniform() < pi0) {
      d.y(i) = 0.0;
      continue;
    }
    const double mean = std::exp(d.x.row(i).dot(beta));
    // NB as a gamma-Poisson mixture with shape 1/alpha and mean `mean`.
    std::gamma_distribution<double> gam(1.0 / dispersion, mean * dispersion);
    std::poisson_distribution<long> pois(gam(rng.engine()));
    d.y(i) = static_cast<double>(pois(rng.engine()));
  }
  return d;
}

/// Weibull survival with hazard rho t^(rho-1) exp(x beta), rho = exp(z gamma),
/// and independent exponential censoring.
inline Dataset weibull(std::uint64_t seed, Index n, const Vector& beta, const Vector& gamma, double censor_rate = 0.3) {
  RngStream rng(seed);
  Dataset d;
  d.x = Matrix::Ones(n, beta.size());
  d.z = Matrix::Ones(n, gamma.size());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 1; j < beta.size(); ++j) d.x(i, j) = rng.normal() * 0.5;
    for (Index j = 1; j < gamma.size(); ++j) d.z(i, j) = rng.normal() * 0.5;
  }
  d.time = Vector(n);
  d.event = Vector(n);
  for (Index i = 0; i < n; ++i) {
    const double rho = std::exp(d.z.row(i).dot(gamma));
    const double scale = std::exp(d.x.row(i).dot(beta));
    // S(t) = exp(-scale t^rho)  =>  t = (-log U / scale)^(1/rho)
    const double t = std::pow(-std::log(1.0 - rng.uniform()) / scale, 1.0 / rho);
    const double c = censor_rate > 0 ? -std::log(1.0 - rng.uniform()) / censor_rate : INFINITY;
    d.time(i) = std::min(t, c);
    d.event(i) = t <= c ? 1.0 : 0.0;
  }
  return d;
}

/// Sparse random-intercept Poisson GLMM: log mu_ij = -2.5 - 2 x_ij + b_i,
/// x_ij = (j - 4)/10 for j = 1..7, b_i ~ N(0, re_sd^2).
inline Dataset poisson_glmm(std::uint64_t seed, Index subjects = 5000, double re_sd = 1.0) {
  RngStream rng(seed);
  const Index per = 7;
  Dataset d;
  d.x = Matrix::Ones(subjects * per, 2);
  d.z = Matrix::Ones(subjects * per, 1);
  d.y = Vector(subjects * per);
  d.group.resize(subjects * per);
  for (Index i = 0; i < subjects; ++i) {
    const double b = re_sd * rng.normal();
    for (Index j = 1; j <= per; ++j) {
      const Index k = i * per + (j - 1);
      d.x(k, 1) = (j - 4) / 10.0;
      d.group[k] = i;
      std::poisson_distribution<long> pois(std::exp(-2.5 - 2.0 * d.x(k, 1) + b));
      d.y(k) = static_cast<double>(pois(rng.engine()));
    }
  }
  return d;
}

}  // namespace synthetic
}  // namespace csnvi
