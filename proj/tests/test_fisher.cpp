#include "csnvi/fisher.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace csnvi;

namespace {

ParamGradient random_gradient(RngStream& rng, Index d, FactorKind kind) {
  ParamGradient g = zero_gradient(d, kind);
  const Vector x = rng.normal_vector(g.size());
  return ParamGradient::unflatten(x, d, kind);
}

double max_abs(const Vector& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST(Elimination, Identities) {
  const Index d = 4;
  RngStream rng(1);
  Matrix x(d, d);
  for (Index i = 0; i < d * d; ++i) x.data()[i] = rng.normal();
  const Eigen::Map<const Vector> vx(x.data(), d * d);
  EXPECT_TRUE((elimination_lower(d) * vx).isApprox(vech(x)));
  EXPECT_TRUE((elimination_upper(d) * vx).isApprox(vech_u(x)));
  EXPECT_TRUE((elimination_diag(d) * vx).isApprox(Vector(x.diagonal())));
  const Matrix xt = x.transpose();
  EXPECT_TRUE((commutation(d) * vx).isApprox(Eigen::Map<const Vector>(xt.data(), d * d)));
}

TEST(FisherOracle, UnivariateSymmetricValues) {
  SkewParams p{Vector::Zero(1), FactorForm::cholesky(Matrix::Ones(1, 1)), SkewParam::lambda(Vector::Zero(1))};
  const Matrix fi = fisher_oracle(p);
  ASSERT_EQ(fi.rows(), 3);
  EXPECT_NEAR(fi(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(fi(1, 1), 1.0 - 2.0 / kPi, 1e-15);
  EXPECT_NEAR(fi(1, 1), 0.36338, 1e-5);
  EXPECT_NEAR(fi(2, 2), 2.0, 1e-15);
  EXPECT_NEAR(fi(1, 2), 0.0, 1e-15);
}

TEST(FisherOracle, SymmetricPositiveDefinite) {
  RngStream rng(2);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    for (Index d = 1; d <= 4; ++d) {
      for (int rep = 0; rep < 5; ++rep) {
        const SkewParams p = oracle::random_params(rng, {d, fk, SkewKind::lambda, 5.0, 0.05});
        const Matrix fi = fisher_oracle(p);
        EXPECT_LT((fi - fi.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        Eigen::SelfAdjointEigenSolver<Matrix> es(fi);
        EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
      }
    }
  }
  const Index big = kFisherOracleMaxDim + 1;
  SkewParams p{Vector::Zero(big), FactorForm::cholesky(Matrix::Identity(big, big)), SkewParam::lambda(Vector::Zero(big))};
  EXPECT_THROW(fisher_oracle(p), std::invalid_argument);
}

TEST(Score, MatchesFiniteDifferencesOfJointLogDensity) {
  RngStream rng(3);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    for (Index d = 1; d <= 3; ++d) {
      const SkewParams p = oracle::random_params(rng, {d, fk, SkewKind::lambda});
      const Vector theta = p.mu + rng.normal_vector(d);
      const Vector w = rng.normal_vector(d);
      const Vector eta = flatten_params(p);
      const auto f = [&](const Vector& e) { return log_q_joint(unflatten_params(e, d, fk, SkewKind::lambda), theta, w); };
      const Vector fd = oracle::finite_diff(f, eta, 1e-6);
      const Vector sc = score_logq_joint(p, theta, w).flatten();
      EXPECT_LT(max_abs(sc - fd) / std::max(1.0, max_abs(sc)), 1e-6);
    }
  }
}

TEST(Score, SkewComponentAtZero) {
  // At lambda = 0: kappa = 1, alpha = 0, so the lambda score is z * w_tilde.
  RngStream rng(4);
  SkewParams p = oracle::random_params(rng, {3, FactorKind::cholesky, SkewKind::lambda});
  p.skew.value.setZero();
  const Vector theta = p.mu + rng.normal_vector(3);
  const Vector w = rng.normal_vector(3);
  const Vector z = p.factor.solve(theta - p.mu);
  const Vector wt = w.cwiseAbs().array() - kB;
  EXPECT_LT(max_abs(score_logq_joint(p, theta, w).d_skew - z.cwiseProduct(wt)), 1e-14);
}

TEST(Score, MonteCarloCovarianceMatchesOracle) {
  RngStream rng(5);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    const SkewParams p = oracle::random_params(rng, {2, fk, SkewKind::lambda, 3.0, 0.3});
    const Csn q(p);
    const Matrix fi = fisher_oracle(p);
    const Index n = 1000000, m = fi.rows();
    Matrix sum = Matrix::Zero(m, m), sum2 = Matrix::Zero(m, m);
    Vector mean = Vector::Zero(m);
    for (Index k = 0; k < n; ++k) {
      const NoisePair nz = NoisePair::draw(rng, 2);
      const Vector theta = q.transform(nz.w1, nz.w2);
      const Vector s = score_logq_joint(p, theta, nz.w1).flatten();
      const Matrix o = s * s.transpose();
      mean += s;
      sum += o;
      sum2 += o.cwiseProduct(o);
    }
    mean /= double(n);
    const Matrix emp = sum / double(n);
    const Matrix var = sum2 / double(n) - emp.cwiseProduct(emp);
    for (Index i = 0; i < m; ++i) {
      EXPECT_LT(std::abs(mean(i)), 4.0 * std::sqrt(emp(i, i) / n));
      for (Index j = 0; j < m; ++j)
        EXPECT_LT(std::abs(emp(i, j) - fi(i, j)), 4.0 * std::sqrt(var(i, j) / n)) << to_string(fk) << " " << i << "," << j;
    }
  }
}

TEST(NaturalGradient, CholeskyMatchesOracle) {
  RngStream rng(6);
  for (Index d = 1; d <= 4; ++d) {
    for (int rep = 0; rep < 20; ++rep) {
      const SkewParams p = oracle::random_params(rng, {d, FactorKind::cholesky, SkewKind::lambda});
      const ParamGradient g = random_gradient(rng, d, FactorKind::cholesky);
      const Vector diff = natural_grad_cholesky(g, p).flatten() - natural_grad_oracle(g, p).flatten();
      EXPECT_LT(max_abs(diff), 1e-8) << "d=" << d;
    }
  }
}

TEST(NaturalGradient, LuMatchesOracle) {
  RngStream rng(7);
  for (Index d = 1; d <= 4; ++d) {
    for (int rep = 0; rep < 20; ++rep) {
      const SkewParams p = oracle::random_params(rng, {d, FactorKind::lu, SkewKind::lambda});
      const ParamGradient g = random_gradient(rng, d, FactorKind::lu);
      const Vector diff = natural_grad_lu(g, p).flatten() - natural_grad_oracle(g, p).flatten();
      EXPECT_LT(max_abs(diff), 1e-8) << "d=" << d;
    }
  }
}

TEST(NaturalGradient, SymmetricIdentityCase) {
  const Index d = 3;
  SkewParams p{Vector::Zero(d), FactorForm::cholesky(Matrix::Identity(d, d)), SkewParam::lambda(Vector::Zero(d))};
  RngStream rng(8);
  const ParamGradient g = random_gradient(rng, d, FactorKind::cholesky);
  const ParamGradient n = natural_grad_cholesky(g, p);
  EXPECT_LT(max_abs(n.d_mu - g.d_mu), 1e-15);
  EXPECT_LT(max_abs(n.d_skew - g.d_skew / (1.0 - 2.0 / kPi)), 1e-14);
  // kappa = 1: strictly lower entries pass through, diagonal halves.
  Matrix expect = vech_inv(g.d_vech_l);
  expect.diagonal() *= 0.5;
  EXPECT_LT(max_abs(n.d_vech_l - vech(expect)), 1e-15);
}

TEST(NaturalGradient, LuReducesToCholeskyAtIdentityU) {
  RngStream rng(9);
  for (Index d = 2; d <= 4; ++d) {
    const SkewParams pc = oracle::random_params(rng, {d, FactorKind::cholesky, SkewKind::lambda, 3.0, 0.2});
    const SkewParams pl{pc.mu, FactorForm::lu(pc.factor.l(), Matrix::Identity(d, d)), pc.skew};
    ParamGradient gc = random_gradient(rng, d, FactorKind::cholesky);
    ParamGradient gl = gc;
    gl.d_vech_u = Vector::Zero(vech_u_size(d));
    const ParamGradient nc = natural_grad_cholesky(gc, pc);
    const ParamGradient nl = natural_grad_lu(gl, pl);
    EXPECT_LT(max_abs(nc.d_mu - nl.d_mu), 1e-10);
    EXPECT_LT(max_abs(nc.d_skew - nl.d_skew), 1e-10);
  }
}

TEST(NaturalGradient, PreservesAscentDirection) {
  RngStream rng(10);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    for (int rep = 0; rep < 50; ++rep) {
      const Index d = 1 + rep % 5;
      const SkewParams p = oracle::random_params(rng, {d, fk, SkewKind::lambda, 3.0, 0.05});
      const ParamGradient g = random_gradient(rng, d, fk);
      EXPECT_GT(g.flatten().dot(natural_grad(g, p).flatten()), 0.0);
    }
  }
}

TEST(NaturalGradient, AlphaCubedChainMatchesTransformedFisher) {
  RngStream rng(11);
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    const SkewParams p = oracle::random_params(rng, {2, fk, SkewKind::lambda, 3.0, 0.3});
    const AuxQuantities ax = derive_aux(p.skew);
    const ParamGradient g = random_gradient(rng, 2, fk);
    // In alpha^3 coordinates the Jacobian is J = diag(d lambda / d alpha^3) on the skew block.
    const Index m = g.size();
    Vector jd = Vector::Ones(m);
    jd.segment(2, 2) = alpha_cubed_jacobian(ax).cwiseInverse();
    const Matrix j = jd.asDiagonal();
    const Matrix fi_a = j * fisher_oracle(p) * j;
    const Vector g_a = j * g.flatten();
    const Vector nat_a = fi_a.ldlt().solve(g_a);
    const ParamGradient nat = natural_grad(g, p);
    EXPECT_LT(max_abs(natural_chain_alpha_cubed(nat.d_skew, ax) - nat_a.segment(2, 2)), 1e-7);
    EXPECT_LT(max_abs(nat.d_mu - nat_a.segment(0, 2)), 1e-7);
  }
}
