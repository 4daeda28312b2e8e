#pragma once

// Approximation-quality metrics: integrated absolute error between 1-D
// densities, Gaussian kernel density estimates, and the kernel MMD.

#include "csnvi/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <vector>

namespace csnvi {

/// Density values on a uniform, strictly increasing grid.
struct DensityGrid {
  Vector x;
  Vector values;

  static DensityGrid uniform(double lo, double hi, Index n) {
    if (!(hi > lo) || n < 2) throw std::invalid_argument("density grid: need lo < hi and at least two points");
    return {Vector::LinSpaced(n, lo, hi), Vector::Zero(n)};
  }

  template <class F>
  static DensityGrid tabulate(double lo, double hi, Index n, F&& f) {
    DensityGrid g = uniform(lo, hi, n);
    for (Index i = 0; i < n; ++i) g.values(i) = f(g.x(i));
    return g;
  }

  double integral() const {
    double s = 0.0;
    for (Index i = 1; i < x.size(); ++i) s += 0.5 * (x(i) - x(i - 1)) * (values(i) + values(i - 1));
    return s;
  }

  /// Linear interpolation, zero outside the grid.
  double at(double t) const {
    if (t < x(0) || t > x(x.size() - 1)) return 0.0;
    const double h = (x(x.size() - 1) - x(0)) / static_cast<double>(x.size() - 1);
    const Index k = std::min<Index>(static_cast<Index>((t - x(0)) / h), x.size() - 2);
    const double w = (t - x(k)) / (x(k + 1) - x(k));
    return (1 - w) * values(k) + w * values(k + 1);
  }

  void validate() const {
    if (x.size() != values.size() || x.size() < 2) throw std::invalid_argument("density grid: sizes differ or too few points");
    for (Index i = 1; i < x.size(); ++i)
      if (!(x(i) > x(i - 1))) throw std::invalid_argument("density grid: abscissae must be strictly increasing");
    if ((values.array() < 0).any()) throw std::invalid_argument("density grid: negative density value");
  }

  /// True if the trapezoid mass is within 1%; otherwise warns on stderr.
  bool check_mass(std::ostream& warn = std::cerr) const {
    const double m = integral();
    if (m < 0.99 || m > 1.01) {
      warn << "warning: density grid integrates to " << m << "\n";
      return false;
    }
    return true;
  }
};

struct IaeResult {
  double iae = 0.0;
  double accuracy_percent = 0.0;
};

/// Integrated absolute error by the trapezoid rule. Grids with different
/// abscissae are compared on the union of both by linear interpolation.
inline IaeResult iae_accuracy(const DensityGrid& q, const DensityGrid& gold) {
  q.validate();
  gold.validate();
  double iae = 0.0;
  if (q.x.size() == gold.x.size() && q.x == gold.x) {
    const Vector d = (q.values - gold.values).cwiseAbs();
    for (Index i = 1; i < d.size(); ++i) iae += 0.5 * (q.x(i) - q.x(i - 1)) * (d(i) + d(i - 1));
  } else {
    std::vector<double> pts(q.x.data(), q.x.data() + q.x.size());
    pts.insert(pts.end(), gold.x.data(), gold.x.data() + gold.x.size());
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    double prev = std::abs(q.at(pts[0]) - gold.at(pts[0]));
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double cur = std::abs(q.at(pts[i]) - gold.at(pts[i]));
      iae += 0.5 * (pts[i] - pts[i - 1]) * (cur + prev);
      prev = cur;
    }
  }
  return {iae, (1.0 - iae / 2.0) * 100.0};
}

/// Silverman's rule of thumb, 0.9 min(sd, IQR/1.34) n^(-1/5).
inline double silverman_bandwidth(const Vector& s) {
  const Index n = s.size();
  if (n < 2) return 1.0;
  const double mean = s.mean();
  const double sd = std::sqrt((s.array() - mean).square().sum() / static_cast<double>(n - 1));
  std::vector<double> v(s.data(), s.data() + n);
  std::sort(v.begin(), v.end());
  const auto quant = [&](double p) {
    const double pos = p * static_cast<double>(n - 1);
    const auto k = static_cast<std::size_t>(pos);
    const double w = pos - static_cast<double>(k);
    return k + 1 < v.size() ? (1 - w) * v[k] + w * v[k + 1] : v[k];
  };
  const double iqr = quant(0.75) - quant(0.25);
  double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
  if (!(spread > 0)) spread = 1.0;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

/// Gaussian-kernel density estimate on a 1024-point grid spanning the data
/// range plus three bandwidths either side.
inline DensityGrid kde_1d(const Vector& samples, std::optional<double> bandwidth = std::nullopt, Index points = 1024) {
  if (samples.size() == 0) throw std::invalid_argument("kde: no samples");
  const double bw = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(bw > 0)) throw std::invalid_argument("kde: bandwidth must be positive");
  DensityGrid g = DensityGrid::uniform(samples.minCoeff() - 3 * bw, samples.maxCoeff() + 3 * bw, points);
  const Index n = samples.size();
  const double lo = g.x(0), h = g.x(1) - g.x(0);
  if (n * points <= 20000000) {
    for (Index i = 0; i < points; ++i) {
      double s = 0.0;
      for (Index k = 0; k < n; ++k) {
        const double u = (g.x(i) - samples(k)) / bw;
        s += std::exp(-0.5 * u * u);
      }
      g.values(i) = s / (static_cast<double>(n) * bw * std::sqrt(2 * kPi));
    }
    return g;
  }
  // Large inputs: bin linearly onto the grid, then convolve with the kernel.
  Vector counts = Vector::Zero(points);
  for (Index k = 0; k < n; ++k) {
    const double pos = (samples(k) - lo) / h;
    const Index i = std::min<Index>(static_cast<Index>(pos), points - 2);
    const double w = pos - static_cast<double>(i);
    counts(i) += 1 - w;
    counts(i + 1) += w;
  }
  const Index reach = std::min<Index>(points - 1, static_cast<Index>(std::ceil(8 * bw / h)));
  Vector kern(reach + 1);
  for (Index j = 0; j <= reach; ++j) {
    const double u = j * h / bw;
    kern(j) = std::exp(-0.5 * u * u) / (bw * std::sqrt(2 * kPi));
  }
  for (Index i = 0; i < points; ++i) {
    double s = 0.0;
    const Index a = std::max<Index>(0, i - reach), b = std::min<Index>(points - 1, i + reach);
    for (Index j = a; j <= b; ++j)
      if (counts(j) != 0) s += counts(j) * kern(std::abs(i - j));
    g.values(i) = s / static_cast<double>(n);
  }
  return g;
}

struct MmdResult {
  double mmd = 0.0;
  double m_star = 0.0;
  double bandwidth = 0.0;
  double std_error = 0.0;  // of the U-statistic
};

/// Median of pooled pairwise Euclidean distances.
inline double median_heuristic(const Matrix& a, const Matrix& b) {
  Matrix all(a.rows() + b.rows(), a.cols());
  all << a, b;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(all.rows() * (all.rows() - 1) / 2));
  for (Index i = 0; i < all.rows(); ++i)
    for (Index j = i + 1; j < all.rows(); ++j) d.push_back((all.row(i) - all.row(j)).norm());
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) med = 0.5 * (med + *std::max_element(d.begin(), mid));
  return med > 0 ? med : 1.0;
}

/// Unbiased MMD^2 with kernel exp(-|x - y|^2 / (2 bw^2)), summed over i != j,
/// and M* = -log(max(MMD, 0) + 1e-5).
inline MmdResult mmd_mstar(const Matrix& a, const Matrix& b, std::optional<double> bandwidth = std::nullopt) {
  const Index m = a.rows();
  if (b.rows() != m) throw std::invalid_argument("mmd: sample sets must have the same number of rows");
  if (a.cols() != b.cols()) throw std::invalid_argument("mmd: sample sets have different dimensions");
  if (m < 2) throw std::invalid_argument("mmd: need at least two rows per sample set");
  const double bw = bandwidth ? *bandwidth : median_heuristic(a, b);
  const double g = 1.0 / (2 * bw * bw);
  const auto k = [&](const auto& x, const auto& y) { return std::exp(-g * (x - y).squaredNorm()); };
  // Per-row sums of the symmetric U-statistic kernel h((x_i,y_i),(x_j,y_j)).
  Vector row = Vector::Zero(m);
  double hh = 0.0;
  for (Index i = 0; i < m; ++i)
    for (Index j = i + 1; j < m; ++j) {
      const double h = k(a.row(i), a.row(j)) + k(b.row(i), b.row(j)) - k(a.row(i), b.row(j)) - k(a.row(j), b.row(i));
      row(i) += h;
      row(j) += h;
      hh += h * h;
    }
  const double md = static_cast<double>(m);
  const double pairs = md * (md - 1) / 2;
  const double mmd = row.sum() / (md * (md - 1));
  // Hoeffding decomposition: Var(U) = [4 (m-2) zeta1 + 2 zeta2] / (m (m-1)). The
  // second term dominates when the two distributions agree.
  const Vector h1 = row / (md - 1);
  const double zeta1 = std::max(0.0, (h1.array() - mmd).square().sum() / (md - 1));
  const double zeta2 = std::max(0.0, hh / pairs - mmd * mmd);
  const double var_u = (4 * (md - 2) * zeta1 + 2 * zeta2) / (md * (md - 1));
  MmdResult r;
  r.mmd = mmd;
  r.m_star = -std::log(std::max(mmd, 0.0) + 1e-5);
  r.bandwidth = bw;
  r.std_error = std::sqrt(var_u);
  return r;
}

}  // namespace csnvi
