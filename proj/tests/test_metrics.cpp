#include "csnvi/metrics.hpp"
#include "csnvi/rng.hpp"
#include "csnvi/special.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace csnvi;

namespace {

DensityGrid normal_grid(double mean, double sd, double lo, double hi, Index n = 1024) {
  return DensityGrid::tabulate(lo, hi, n, [&](double x) { return norm_pdf((x - mean) / sd) / sd; });
}

Matrix normal_rows(RngStream& rng, Index m, Index d, double shift = 0.0) {
  Matrix x(m, d);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < d; ++j) x(i, j) = shift + rng.normal();
  return x;
}

}  // namespace

TEST(Iae, IdenticalAndDisjoint) {
  const DensityGrid a = normal_grid(0, 1, -10, 10);
  const IaeResult same = iae_accuracy(a, a);
  EXPECT_EQ(same.iae, 0.0);
  EXPECT_EQ(same.accuracy_percent, 100.0);
  const DensityGrid b = normal_grid(-40, 1, -60, 60), c = normal_grid(40, 1, -60, 60);
  const IaeResult far = iae_accuracy(b, c);
  EXPECT_NEAR(far.iae, 2.0, 1e-3);
  EXPECT_NEAR(far.accuracy_percent, 0.0, 0.1);
}

TEST(Iae, ShiftedNormalsMatchClosedForm) {
  for (double delta : {0.5, 1.0, 2.0}) {
    const DensityGrid a = normal_grid(0, 1, -10, 12), b = normal_grid(delta, 1, -10, 12);
    const double exact = 2 * (2 * norm_cdf(delta / 2) - 1);
    EXPECT_NEAR(iae_accuracy(a, b).iae, exact, 1e-3) << delta;
  }
  const DensityGrid a = normal_grid(0, 1, -10, 10), b = normal_grid(0.5, 1, -10, 10);
  EXPECT_NEAR(iae_accuracy(a, b).iae, 0.3949, 1e-4);
  EXPECT_NEAR(iae_accuracy(a, b).accuracy_percent, 80.3, 0.05);
}

TEST(Iae, SymmetricAndAffineInvariant) {
  const DensityGrid a = normal_grid(0, 1, -9, 9), b = DensityGrid::tabulate(-9, 9, 1024, [](double x) {
    return 0.5 * norm_pdf(x - 1) + 0.5 * norm_pdf((x + 1) / 0.7) / 0.7;
  });
  EXPECT_NEAR(iae_accuracy(a, b).iae, iae_accuracy(b, a).iae, 1e-15);
  // y = 3x + 2: densities scale by 1/3 and the grid stretches.
  const auto map = [](const DensityGrid& g) {
    return DensityGrid{(3.0 * g.x.array() + 2.0).matrix(), g.values / 3.0};
  };
  EXPECT_NEAR(iae_accuracy(map(a), map(b)).iae, iae_accuracy(a, b).iae, 1e-10);
}

TEST(Iae, DifferentGridsAreInterpolated) {
  const DensityGrid a = normal_grid(0, 1, -10, 10, 2001), b = normal_grid(0.5, 1, -9, 11, 1500);
  EXPECT_NEAR(iae_accuracy(a, b).iae, 2 * (2 * norm_cdf(0.25) - 1), 1e-3);
}

TEST(Iae, RejectsBadGrids) {
  DensityGrid g = normal_grid(0, 1, -5, 5, 10);
  g.values(3) = -1;
  EXPECT_THROW(iae_accuracy(g, g), std::invalid_argument);
  EXPECT_THROW(DensityGrid::uniform(1, 1, 10), std::invalid_argument);
  std::ostringstream warn;
  EXPECT_FALSE(normal_grid(0, 1, 0, 5).check_mass(warn));
  EXPECT_NE(warn.str().find("integrates"), std::string::npos);
}

TEST(Kde, StandardNormalSample) {
  RngStream rng(1);
  const Vector s = rng.normal_vector(1000000);
  const DensityGrid k = kde_1d(s);
  EXPECT_EQ(k.x.size(), 1024);
  const DensityGrid exact = DensityGrid{k.x, k.x.unaryExpr([](double x) { return norm_pdf(x); })};
  EXPECT_LT(iae_accuracy(k, exact).iae, 0.02);
  EXPECT_NEAR(k.integral(), 1.0, 1e-3);
}

TEST(Kde, SinglePointAndBandwidthOverride) {
  const Vector one = Vector::Constant(1, 2.5);
  const DensityGrid k = kde_1d(one, 0.4);
  EXPECT_DOUBLE_EQ(k.x(0), 2.5 - 1.2);
  EXPECT_DOUBLE_EQ(k.x(1023), 2.5 + 1.2);
  for (Index i = 0; i < 1024; i += 97) EXPECT_NEAR(k.values(i), norm_pdf((k.x(i) - 2.5) / 0.4) / 0.4, 1e-14);
  RngStream rng(2);
  const Vector s = rng.normal_vector(500);
  const DensityGrid a = kde_1d(s, 0.3), b = kde_1d(s, 0.3);
  EXPECT_TRUE(a.values == b.values);
  EXPECT_EQ(a.x(0), s.minCoeff() - 0.9);
  EXPECT_THROW(kde_1d(Vector()), std::invalid_argument);
}

TEST(Mmd, IdenticalSetsClamp) {
  RngStream rng(3);
  const Matrix a = normal_rows(rng, 200, 2);
  const MmdResult r = mmd_mstar(a, a);
  EXPECT_LE(r.mmd, 1e-12);
  EXPECT_NEAR(r.m_star, -std::log(1e-5), 1e-12);
  EXPECT_NEAR(r.m_star, 11.5129, 1e-4);
}

TEST(Mmd, SeparatedDistributions) {
  double lowest = 1e9;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RngStream rng(100 + seed);
    const Matrix a = normal_rows(rng, 1000, 2), b = normal_rows(rng, 1000, 2, 3.0);
    lowest = std::min(lowest, mmd_mstar(a, b).mmd);
  }
  EXPECT_GT(lowest, 0.5);
}

TEST(Mmd, PermutationInvariant) {
  RngStream rng(4);
  const Matrix a = normal_rows(rng, 300, 3), b = normal_rows(rng, 300, 3, 0.2);
  std::vector<int> idx(300);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  // The statistic pairs row i of one set with row i of the other, so rows
  // are shuffled jointly.
  Matrix ap(300, 3), bp(300, 3);
  for (int i = 0; i < 300; ++i) ap.row(i) = a.row(idx[i]), bp.row(i) = b.row(idx[i]);
  const double bw = 1.3;
  EXPECT_NEAR(mmd_mstar(a, b, bw).mmd, mmd_mstar(ap, bp, bw).mmd, 1e-14);
  EXPECT_NEAR(mmd_mstar(a, b).mmd, mmd_mstar(ap, bp).mmd, 1e-14);
}

TEST(Mmd, SameDistributionConcentratesAtZero) {
  int outside = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    RngStream rng(500 + rep);
    const Matrix a = normal_rows(rng, 1000, 2), b = normal_rows(rng, 1000, 2);
    const MmdResult r = mmd_mstar(a, b);
    if (std::abs(r.mmd) >= 4 * r.std_error) ++outside;
  }
  EXPECT_EQ(outside, 0);
}

TEST(Mmd, RejectsBadInput) {
  EXPECT_THROW(mmd_mstar(Matrix::Zero(1, 2), Matrix::Zero(1, 2)), std::invalid_argument);
  EXPECT_THROW(mmd_mstar(Matrix::Zero(3, 2), Matrix::Zero(4, 2)), std::invalid_argument);
  EXPECT_THROW(mmd_mstar(Matrix::Zero(3, 2), Matrix::Zero(3, 1)), std::invalid_argument);
}
