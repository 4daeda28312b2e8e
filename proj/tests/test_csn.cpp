#include "csnvi/csn.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace csnvi;
using csnvi::oracle::finite_diff;
using csnvi::oracle::integrate;

namespace {

SkewParams make_2d(double l1, double l2, Vector mu = Vector::Zero(2)) {
  Matrix l(2, 2);
  l << 1.0, 0.0, 0.5, 1.2;
  Vector lam(2);
  lam << l1, l2;
  return {std::move(mu), FactorForm::cholesky(l), SkewParam::lambda(lam)};
}

SkewParams make_1d(double mu, double sigma, double lambda, SkewKind kind = SkewKind::lambda) {
  Vector m(1), lam(1);
  m << mu;
  lam << lambda;
  return {m, FactorForm::cholesky(Matrix::Constant(1, 1, sigma)), from_lambda(lam, kind)};
}

double gaussian_log_density(const Vector& x, const Vector& mu, const Matrix& cov) {
  Eigen::LLT<Matrix> llt(cov);
  const Vector y = llt.matrixL().solve(x - mu);
  const double logdet = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  return -0.5 * x.size() * kLog2Pi - 0.5 * logdet - 0.5 * y.squaredNorm();
}

}  // namespace

TEST(Aux, SymmetricCase) {
  const AuxQuantities a = aux_from_lambda(Vector::Zero(3));
  EXPECT_TRUE(a.delta.isZero());
  EXPECT_TRUE(a.alpha.isZero());
  EXPECT_TRUE(a.tau.isOnes());
  EXPECT_TRUE(a.kappa.isOnes());
}

TEST(Aux, LambdaOne) {
  const AuxQuantities a = aux_from_lambda(Vector::Ones(1));
  EXPECT_NEAR(a.delta(0), 0.707107, 1e-6);
  EXPECT_NEAR(a.tau(0), 0.825645, 1e-6);
  EXPECT_NEAR(a.alpha(0), 0.856429, 1e-6);
  EXPECT_NEAR(a.kappa(0), 0.856429, 1e-6);
  EXPECT_NEAR(a.alpha(0), a.delta(0) / a.tau(0), 1e-15);
  EXPECT_NEAR(lambda_from_alpha(a.alpha(0)), 1.0, 1e-14);
}

TEST(Aux, AlphaCubedBound) {
  EXPECT_NEAR(alpha_cubed_bound(), 4.565, 5e-4);
  Vector bad(2);
  bad << 1.0, -4.6;
  try {
    to_lambda(SkewParam::alpha_cubed(bad));
    FAIL() << "expected domain error";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("component 1"), std::string::npos);
  }
  Vector edge(1);
  edge << 10.0;
  EXPECT_LT(clip_to_domain(SkewParam::alpha_cubed(edge)).value(0), alpha_cubed_bound());
}

TEST(Aux, ParametrizationRoundTrip) {
  Vector lam(6);
  lam << -7.5, -1.0, -1e-3, 0.0, 0.4, 25.0;
  for (SkewKind k : {SkewKind::lambda, SkewKind::lambda_cubed, SkewKind::alpha_cubed}) {
    const Vector back = to_lambda(from_lambda(lam, k));
    for (Index i = 0; i < lam.size(); ++i) EXPECT_NEAR(back(i), lam(i), 1e-12 * std::max(1.0, std::abs(lam(i))));
    const Vector via = to_lambda(convert(convert(from_lambda(lam, k), SkewKind::alpha_cubed), SkewKind::lambda_cubed));
    for (Index i = 0; i < lam.size(); ++i) EXPECT_NEAR(via(i), lam(i), 1e-12 * std::max(1.0, std::abs(lam(i))));
  }
}

TEST(Factor, RejectsSingularAndMalformed) {
  Matrix l = Matrix::Identity(2, 2);
  l(1, 1) = 0.0;
  EXPECT_THROW(FactorForm::cholesky(l), std::runtime_error);
  Matrix upper = Matrix::Identity(2, 2);
  upper(0, 1) = 1.0;
  EXPECT_THROW(FactorForm::cholesky(upper), std::invalid_argument);
  Matrix u = Matrix::Identity(2, 2);
  u(1, 1) = 2.0;
  EXPECT_THROW(FactorForm::lu(Matrix::Identity(2, 2), u), std::invalid_argument);
}

TEST(LogDensity, StandardNormalAtZero) {
  EXPECT_NEAR(log_density(make_1d(0, 1, 0), Vector::Zero(1)), -0.5 * std::log(2 * kPi), 1e-15);
}

TEST(LogDensity, GaussianWhenSymmetric) {
  RngStream rng(11);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    SkewParams p = oracle::random_params(rng, {3, fk, SkewKind::lambda});
    p.skew = SkewParam::lambda(Vector::Zero(3));
    const Matrix cov = p.factor.covariance();
    for (int k = 0; k < 20; ++k) {
      const Vector x = rng.normal_vector(3) * 2.0;
      EXPECT_NEAR(log_density(p, x), gaussian_log_density(x, p.mu, cov), 1e-12);
    }
  }
}

TEST(LogDensity, NegativeDiagonalAllowed) {
  SkewParams p = make_1d(0.3, 1.7, 0.8);
  SkewParams flipped = make_1d(0.3, -1.7, -0.8);
  // theta = mu + C z is invariant under (C, lambda) -> (-C, -lambda).
  for (double x : {-2.0, 0.0, 1.5}) {
    Vector t(1);
    t << x;
    EXPECT_NEAR(log_density(p, t), log_density(flipped, t), 1e-13);
  }
}

TEST(LogDensity, UnivariateSkewNormalEquivalence) {
  for (double lam : {-3.0, -0.7, 0.0, 1.0, 2.5}) {
    const double mu = 0.4, sigma = 1.3;
    const SkewParams p = make_1d(mu, sigma, lam);
    const AuxQuantities a = aux_from_lambda(p.skew.value);
    const double xi = mu - kB * sigma * a.alpha(0);
    const double omega2 = sigma * sigma / (a.tau(0) * a.tau(0));
    const double slope = lam * a.tau(0) / sigma;
    for (double x = -6.0; x <= 6.0; x += 0.37) {
      Vector t(1);
      t << x;
      EXPECT_NEAR(log_density(p, t), oracle::sn1_log_density(x, xi, omega2, slope), 1e-12);
    }
  }
}

TEST(LogDensity, NormalizesInTwoDimensions) {
  const SkewParams p = make_2d(2.0, -1.0);
  const Csn q(p);
  const double total = integrate(
      [&](double x) {
        return integrate(
            [&](double y) {
              Vector t(2);
              t << x, y;
              return std::exp(q.log_density(t));
            },
            -12.0, 12.0, 1e-10);
      },
      -12.0, 12.0, 1e-10);
  EXPECT_NEAR(total, 1.0, 1e-4);
}

TEST(LogDensity, NormalizesInOneDimension) {
  const Csn q(make_1d(-0.5, 0.7, -2.2));
  const double total = integrate([&](double x) { return std::exp(q.log_density(Vector::Constant(1, x))); }, -15, 15);
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(GradTheta, GaussianCase) {
  Vector x(2);
  x << 0.3, -1.2;
  SkewParams p{Vector::Zero(2), FactorForm::cholesky(Matrix::Identity(2, 2)), SkewParam::lambda(Vector::Zero(2))};
  EXPECT_TRUE(grad_theta_log_density(p, x).isApprox(-x, 1e-15));
}

TEST(GradTheta, MatchesFiniteDifferences) {
  RngStream rng(3);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    for (int rep = 0; rep < 20; ++rep) {
      const SkewParams p = oracle::random_params(rng, {2 + rep % 3, fk, SkewKind::alpha_cubed});
      const Csn q(p);
      const Vector x = p.mu + rng.normal_vector(p.dim());
      const Vector g = q.grad_log_density(x);
      const Vector fd = finite_diff([&](const Vector& t) { return q.log_density(t); }, x);
      EXPECT_LT((g - fd).cwiseAbs().maxCoeff() / std::max(1.0, g.cwiseAbs().maxCoeff()), 1e-6);
    }
  }
}

TEST(GradTheta, VanishesAtMode) {
  const Csn q(make_2d(2.0, -1.0));
  // Newton ascent with a finite-difference Hessian of the analytic gradient.
  Vector x = q.mu();
  for (int it = 0; it < 100; ++it) {
    const Vector g = q.grad_log_density(x);
    if (g.norm() < 1e-13) break;
    Matrix hess(2, 2);
    for (Index j = 0; j < 2; ++j) {
      Vector a = x, b = x;
      a(j) += 1e-6;
      b(j) -= 1e-6;
      hess.col(j) = (q.grad_log_density(a) - q.grad_log_density(b)) / 2e-6;
    }
    x -= hess.ldlt().solve(g);
  }
  EXPECT_LT(q.grad_log_density(x).norm(), 1e-8);
  // and it is a maximum: nearby points are lower
  for (int k = 0; k < 8; ++k) {
    Vector dir(2);
    dir << std::cos(k * kPi / 4), std::sin(k * kPi / 4);
    EXPECT_LT(q.log_density(x + 1e-3 * dir), q.log_density(x));
  }
}

TEST(Sample, DeterministicGivenSeed) {
  const SkewParams p = make_2d(1.5, -0.5);
  RngStream a(99), b(99);
  EXPECT_EQ(sample(p, a, 50), sample(p, b, 50));
  RngStream r(1);
  EXPECT_THROW(sample(p, r, -1), std::invalid_argument);
}

TEST(Sample, MomentsMatchMeanAndCovariance) {
  const Index n = 1000000;
  for (double scale : {0.0, 1.0}) {
    Vector mu(2);
    mu << 0.5, -1.0;
    const SkewParams p = make_2d(1.5 * scale, -0.5 * scale, mu);
    RngStream rng(2024);
    const Matrix s = sample(p, rng, n);
    const auto [m, cov] = mean_cov(p);
    const Vector mean = s.colwise().mean();
    const Matrix cen = s.rowwise() - mean.transpose();
    const Matrix ecov = cen.transpose() * cen / double(n - 1);
    for (Index i = 0; i < 2; ++i) {
      EXPECT_LT(std::abs(mean(i) - m(i)), 4.0 * std::sqrt(cov(i, i) / n));
      for (Index j = 0; j < 2; ++j) {
        const Vector prod = cen.col(i).cwiseProduct(cen.col(j));
        const double se = std::sqrt((prod.array() - prod.mean()).square().sum() / (n - 1) / n);
        EXPECT_LT(std::abs(ecov(i, j) - cov(i, j)), 4.0 * se) << i << j;
      }
    }
  }
}

TEST(Sample, ThirdMomentMatchesSkewnessFormula) {
  const SkewParams p = make_2d(2.5, -1.5);
  RngStream rng(77);
  const Index n = 4000000;
  const Matrix s = sample(p, rng, n);
  for (Index i = 0; i < 2; ++i) {
    const Vector x = s.col(i).array() - s.col(i).mean();
    const double sd = std::sqrt(x.squaredNorm() / n);
    const Vector z3 = (x / sd).array().cube();
    const double skew = z3.mean();
    const double se = std::sqrt((z3.array() - skew).square().sum() / (n - 1) / n);
    EXPECT_LT(std::abs(skew - marginal_skewness(p, i)), 4.0 * se) << i;
  }
}

TEST(Skewness, Constants) {
  EXPECT_EQ(marginal_skewness(make_1d(0, 1, 0), 0), 0.0);
  Vector a3(1);
  a3 << 1.0;
  const SkewParams p{Vector::Zero(1), FactorForm::cholesky(Matrix::Ones(1, 1)), SkewParam::alpha_cubed(a3)};
  const double b = std::sqrt(2 / kPi);
  EXPECT_NEAR(marginal_skewness(p, 0), b * (4 / kPi - 1), 1e-14);
  EXPECT_NEAR(marginal_skewness(p, 0), 0.218, 5e-4);
}

TEST(Entropy, GaussianValue) {
  const SkewParams p = make_2d(0, 0);
  EXPECT_NEAR(entropy(p), std::log(2 * kPi * std::exp(1.0)) + std::log(1.2), 1e-13);
}

TEST(Entropy, MatchesQuadratureOfDensity) {
  for (double lam : {-3.0, -1.0, 0.0, 1.0, 2.0, 3.0}) {
    const Csn q(make_1d(0.2, 1.0, lam));
    const double ref = -integrate(
        [&](double x) {
          const double lq = q.log_density(Vector::Constant(1, x));
          return std::exp(lq) * lq;
        },
        -40, 40, 1e-15);
    EXPECT_NEAR(q.entropy(), ref, 1e-8) << lam;
  }
}

TEST(Entropy, SymmetricInLambda) {
  RngStream rng(5);
  for (int rep = 0; rep < 10; ++rep) {
    const SkewParams p = oracle::random_params(rng, {3, FactorKind::lu, SkewKind::lambda});
    SkewParams m = p;
    m.skew.value = -p.skew.value;
    EXPECT_EQ(entropy(p), entropy(m));
  }
}

TEST(Entropy, GradientMatchesFiniteDifferences) {
  for (double lam : {-2.5, -0.4, 0.0, 0.9, 3.0}) {
    const SkewParams p = make_1d(0, 1, lam);
    const double h = 1e-5;
    const double fd = (entropy(make_1d(0, 1, lam + h)) - entropy(make_1d(0, 1, lam - h))) / (2 * h);
    EXPECT_NEAR(Csn(p).entropy_grad_lambda()(0), fd, 1e-8) << lam;
  }
  EXPECT_NEAR(Csn(make_1d(0, 1, 0)).entropy_grad_lambda()(0), 0.0, 1e-14);
}

TEST(MeanCov, IdentityAndLu) {
  SkewParams p{Vector::Zero(2), FactorForm::cholesky(Matrix::Identity(2, 2)), SkewParam::lambda(Vector::Ones(2))};
  const auto [m, c] = mean_cov(p);
  EXPECT_TRUE(m.isZero());
  EXPECT_TRUE(c.isIdentity());
  RngStream rng(8);
  const SkewParams lu = oracle::random_params(rng, {4, FactorKind::lu, SkewKind::lambda});
  const Matrix cov = mean_cov(lu).second;
  EXPECT_LT((cov - cov.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  const Matrix l = lu.factor.l(), u = lu.factor.u();
  EXPECT_TRUE(cov.isApprox(l * u * u.transpose() * l.transpose(), 1e-14));
}

TEST(Cgf, DerivativesGiveMeanAndCovariance) {
  RngStream rng(21);
  const SkewParams p = oracle::random_params(rng, {3, FactorKind::lu, SkewKind::alpha_cubed});
  const Csn q(p);
  EXPECT_NEAR(q.cgf(Vector::Zero(3)), 0.0, 1e-15);
  const Vector grad = finite_diff([&](const Vector& t) { return q.cgf(t); }, Vector::Zero(3), 1e-5);
  EXPECT_LT((grad - p.mu).cwiseAbs().maxCoeff(), 1e-6);
  const double h = 1e-4;
  Matrix hess(3, 3);
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      Vector a = Vector::Zero(3), b = a, c = a, d = a;
      a(i) += h, a(j) += h;
      b(i) += h, b(j) -= h;
      c(i) -= h, c(j) += h;
      d(i) -= h, d(j) -= h;
      hess(i, j) = (q.cgf(a) - q.cgf(b) - q.cgf(c) + q.cgf(d)) / (4 * h * h);
    }
  EXPECT_LT((hess - q.covariance()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Cgf, MatchesMonteCarlo) {
  const SkewParams p = make_2d(2.0, -1.0);
  const Csn q(p);
  RngStream rng(31);
  const Matrix s = q.sample(rng, 1000000);
  Vector t(2);
  t << 0.2, -0.15;
  const Vector e = (s * t).array().exp();
  const double mean = e.mean();
  const double se = std::sqrt((e.array() - mean).square().sum() / (e.size() - 1) / e.size());
  EXPECT_LT(std::abs(mean - std::exp(q.cgf(t))), 4.0 * se);
}

TEST(Tilted, ZeroTiltCollapses) {
  RngStream rng(41);
  const SkewParams p = oracle::random_params(rng, {3, FactorKind::cholesky, SkewKind::lambda});
  const TiltedMoments tm = tilted_moments(p, Vector::Zero(3));
  EXPECT_NEAR(tm.log_m, 0.0, 1e-14);
  EXPECT_LT((tm.mean - p.mu).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((tm.cov - p.factor.covariance()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Tilted, AgreesWithCgfAndMonteCarlo) {
  const SkewParams p = make_2d(1.0, 2.0);
  const Csn q(p);
  RngStream rng(51);
  const Matrix s = q.sample(rng, 1000000);
  for (int k = 0; k < 4; ++k) {
    const Vector t = 0.3 * rng.normal_vector(2);
    const TiltedMoments tm = q.tilted_moments(t);
    EXPECT_NEAR(std::exp(q.cgf(t)), std::exp(tm.log_m), 1e-10 * std::exp(tm.log_m));
    const Vector w = (s * t).array().exp();
    const double mean = w.mean();
    const double se = std::sqrt((w.array() - mean).square().sum() / (w.size() - 1) / w.size());
    EXPECT_LT(std::abs(mean - std::exp(tm.log_m)), 4.0 * se);
    // tilted mean: E[theta e^{t'theta}] / M
    const Vector wm = (s.transpose() * w) / double(w.size()) / mean;
    EXPECT_LT((wm - tm.mean).cwiseAbs().maxCoeff(), 0.02);
    Eigen::SelfAdjointEigenSolver<Matrix> es(tm.cov);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Tilted, MeanIsGradientOfCgf) {
  RngStream rng(61);
  const SkewParams p = oracle::random_params(rng, {3, FactorKind::lu, SkewKind::lambda});
  const Csn q(p);
  const Vector s = 0.5 * rng.normal_vector(3);
  const Vector fd = finite_diff([&](const Vector& t) { return q.cgf(t); }, s);
  EXPECT_LT((fd - q.tilted_moments(s).mean).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Canonical, SymmetricCase) {
  const CanonicalCsn cn = to_canonical(make_2d(0, 0));
  EXPECT_TRUE(cn.mu_star.isZero());
  EXPECT_TRUE(cn.d_star.isZero());
  EXPECT_TRUE(cn.sigma_star.isApprox(make_2d(0, 0).factor.covariance()));
}

TEST(Canonical, DensityFormsAgree) {
  RngStream rng(71);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    const SkewParams p = oracle::random_params(rng, {2, fk, SkewKind::alpha_cubed});
    const Csn q(p);
    const CanonicalCsn cn = q.canonical();
    for (int k = 0; k < 100; ++k) {
      const Vector x = p.mu + 1.5 * rng.normal_vector(2);
      EXPECT_NEAR(canonical_log_density(cn, x), q.log_density(x), 1e-10);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(cn.sigma_star - q.covariance());
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Marginal, OneDimensionEqualsDensity) {
  const Csn q(make_1d(0.3, 0.8, -1.7));
  for (double x : {-2.0, 0.0, 0.4, 3.0}) EXPECT_NEAR(q.marginal_log_density(0, x), q.log_density(Vector::Constant(1, x)), 1e-12);
}

TEST(Marginal, SymmetricCaseIsGaussian) {
  const Csn q(make_2d(0, 0));
  const Matrix cov = q.covariance();
  for (Index i = 0; i < 2; ++i)
    for (double x : {-1.0, 0.5, 2.0})
      EXPECT_NEAR(q.marginal_log_density(i, x), -0.5 * kLog2Pi - 0.5 * std::log(cov(i, i)) - 0.5 * x * x / cov(i, i), 1e-12);
}

TEST(Marginal, MatchesIntegratedJoint) {
  const Csn q(make_2d(2.0, -1.0));
  for (Index i = 0; i < 2; ++i) {
    for (double x : {-2.0, -0.5, 0.3, 1.7}) {
      const double ref = integrate(
          [&](double y) {
            Vector t(2);
            t(i) = x;
            t(1 - i) = y;
            return std::exp(q.log_density(t));
          },
          -15, 15, 1e-13);
      EXPECT_NEAR(std::exp(q.marginal_log_density(i, x)), ref, 1e-5);
    }
  }
}

TEST(Marginal, ThreeDimsIntegratesToOneAndMatchesJoint) {
  RngStream rng(81);
  const SkewParams p = oracle::random_params(rng, {3, FactorKind::lu, SkewKind::lambda, 3.0, 0.5});
  const Csn q(p);
  const double total = integrate([&](double x) { return std::exp(q.marginal_log_density(1, x)); }, -15, 15, 1e-9);
  EXPECT_NEAR(total, 1.0, 1e-4);
  const double x = p.mu(1) + 0.3;
  const double ref = integrate(
      [&](double a) {
        return integrate(
            [&](double b) {
              Vector t(3);
              t << a, x, b;
              return std::exp(q.log_density(t));
            },
            -12, 12, 1e-9);
      },
      -12, 12, 1e-9);
  EXPECT_NEAR(std::exp(q.marginal_log_density(1, x)), ref, 1e-5);
}

TEST(Marginal, RejectsLargeDimensionAndBadIndex) {
  const Index d = 13;
  SkewParams p{Vector::Zero(d), FactorForm::cholesky(Matrix::Identity(d, d)), SkewParam::lambda(Vector::Ones(d))};
  try {
    marginal_log_density(p, 0, 0.0);
    FAIL();
  } catch (const UnsupportedDimension& e) {
    EXPECT_NE(std::string(e.what()).find("kernel density"), std::string::npos);
  }
  EXPECT_THROW(marginal_log_density(make_2d(1, 1), 2, 0.0), std::out_of_range);
}
