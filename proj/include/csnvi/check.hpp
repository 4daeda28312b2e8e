#pragma once

// Built-in verification battery behind `csnvi check`: each row compares a
// library routine with an independent computation.

#include "csnvi/fisher.hpp"
#include "csnvi/gradient.hpp"
#include "csnvi/models/glm.hpp"
#include "csnvi/models/glmm.hpp"
#include "csnvi/models/normal.hpp"
#include "csnvi/models/weibull.hpp"
#include "csnvi/models/zinb.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <chrono>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

namespace csnvi {

using NaturalGradFn = std::function<ParamGradient(const ParamGradient&, const SkewParams&)>;

struct CheckOptions {
  bool quick = false;  // only d <= 2 and smaller Monte Carlo sizes
  std::uint64_t seed = 1;
  // Swappable so that a deliberately broken implementation can be fed in.
  NaturalGradFn natural_cholesky = natural_grad_cholesky;
  NaturalGradFn natural_lu = natural_grad_lu;
};

struct CheckRow {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string note;
  double seconds = 0.0;
};

namespace detail {

inline SkewParams check_params(RngStream& rng, Index d, FactorKind fk, double lambda_max = 3.0) {
  Vector mu(d), lam(d);
  for (Index i = 0; i < d; ++i) {
    mu(i) = 2.0 * rng.uniform() - 1.0;
    lam(i) = lambda_max * (2.0 * rng.uniform() - 1.0);
  }
  Matrix l = Matrix::Zero(d, d), u = Matrix::Identity(d, d);
  for (Index j = 0; j < d; ++j) {
    l(j, j) = 0.5 + rng.uniform();
    for (Index i = j + 1; i < d; ++i) l(i, j) = rng.uniform() - 0.5;
    for (Index i = 0; i < j; ++i) u(i, j) = rng.uniform() - 0.5;
  }
  FactorForm f = fk == FactorKind::cholesky ? FactorForm::cholesky(l) : FactorForm::lu(l, u);
  return {mu, f, SkewParam::lambda(lam)};
}

/// Largest relative gap between the analytic gradient and central
/// differences at points center + spread * N(0, I).
inline double gradient_gap(const TargetModel& m, RngStream& rng, int points, const Vector& center, double spread) {
  double worst = 0.0;
  for (int k = 0; k < points; ++k) {
    const Vector x = center + spread * rng.normal_vector(m.dim());
    const Vector g = m.grad_log_joint(x);
    for (Index i = 0; i < x.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(x(i)));
      Vector a = x, b = x;
      a(i) += h;
      b(i) -= h;
      const double fd = (m.log_joint(a) - m.log_joint(b)) / (2 * h);
      worst = std::max(worst, std::abs(fd - g(i)) / std::max(1.0, std::abs(g(i))));
    }
  }
  return worst;
}

template <class F>
CheckRow timed(std::string name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckRow r = body();
  r.name = std::move(name);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace detail

inline std::vector<CheckRow> run_checks(const CheckOptions& opt) {
  std::vector<CheckRow> rows;
  const Index max_d = opt.quick ? 2 : 4;

  // Model gradients against central differences of the log joint.
  {
    std::vector<std::pair<std::string, std::unique_ptr<TargetModel>>> models;
    const Dataset ns = synthetic::normal_sample(opt.seed, 6);
    models.emplace_back("normal-sample", std::make_unique<NormalSampleModel>(ns.y));
    models.emplace_back("normal-variance", std::make_unique<NormalVarianceModel>(ns.y.array() - ns.y.mean()));
    Vector b2(2);
    b2 << 0.3, -0.5;
    models.emplace_back("poisson", std::make_unique<PoissonGlmModel>(synthetic::poisson(opt.seed, 30, b2)));
    models.emplace_back("logistic", std::make_unique<LogisticModel>(synthetic::logistic(opt.seed, 30, b2, 3)));
    if (!opt.quick) {
      models.emplace_back("zinb", std::make_unique<ZinbModel>(synthetic::zinb(opt.seed, 40, b2, b2, 0.5)));
      models.emplace_back("weibull", std::make_unique<WeibullModel>(synthetic::weibull(opt.seed, 40, b2, b2)));
      models.emplace_back("glmm-log",
                          std::make_unique<GlmmModel>(synthetic::poisson_glmm(opt.seed, 4), GlmmLink::log));
    }
    for (auto& [name, m] : models) {
      if (opt.quick && m->dim() > 2) continue;
      // Normal models are probed around the data scale: mean near 100, log variance near 5.4.
      Vector center = Vector::Zero(m->dim());
      if (name == "normal-sample") center << 100.0, 5.4;
      if (name == "normal-variance") center << 5.4;
      rows.push_back(detail::timed("gradient fd: " + name, [&, &model = *m] {
        RngStream rng(opt.seed);
        const double gap = detail::gradient_gap(model, rng, 10, center, name == "normal-sample" ? 1.0 : 0.3);
        return CheckRow{"", gap < 1e-5, gap, 1e-5, std::to_string(model.dim()) + " parameters", 0.0};
      }));
    }
  }

  // Closed-form natural gradients against the inverse Fisher oracle.
  for (FactorKind fk : {FactorKind::cholesky, FactorKind::lu}) {
    const NaturalGradFn& nat = fk == FactorKind::cholesky ? opt.natural_cholesky : opt.natural_lu;
    rows.push_back(detail::timed("natural gradient vs Fisher oracle: " + std::string(to_string(fk)), [&] {
      RngStream rng(opt.seed + 11);
      double worst = 0.0;
      const int reps = opt.quick ? 5 : 20;
      for (Index d = 1; d <= max_d; ++d)
        for (int r = 0; r < reps; ++r) {
          const SkewParams p = detail::check_params(rng, d, fk);
          ParamGradient g = zero_gradient(d, fk);
          g = ParamGradient::unflatten(rng.normal_vector(g.size()), d, fk);
          worst = std::max(worst, (nat(g, p).flatten() - natural_grad_oracle(g, p).flatten()).cwiseAbs().maxCoeff());
        }
      return CheckRow{"", worst < 1e-8, worst, 1e-8, "d = 1.." + std::to_string(max_d), 0.0};
    }));
  }

  // Entropy against quadrature of -q log q.
  rows.push_back(detail::timed("entropy vs quadrature", [&] {
    double worst = 0.0;
    for (double lam : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
      const SkewParams p{Vector::Constant(1, 0.2), FactorForm::cholesky(Matrix::Constant(1, 1, 1.3)),
                         SkewParam::lambda(Vector::Constant(1, lam))};
      const Csn q(p);
      const auto f = [&](double x) {
        const double lq = q.log_density(Vector::Constant(1, x));
        return lq > -700 ? -std::exp(lq) * lq : 0.0;
      };
      using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
      const double h = Rule::integrate(f, -20.0, 0.2, 15, 1e-14) + Rule::integrate(f, 0.2, 20.0, 15, 1e-14);
      worst = std::max(worst, std::abs(h - q.entropy()));
    }
    return CheckRow{"", worst < 1e-8, worst, 1e-8, "d = 1, lambda in {-3,-1,0,1,3}", 0.0};
  }));

  // Tilted moments: E exp(s'theta) and the tilted mean by Monte Carlo.
  rows.push_back(detail::timed("tilted moments vs Monte Carlo", [&] {
    RngStream rng(opt.seed + 23);
    const Index d = 2;
    const SkewParams p = detail::check_params(rng, d, FactorKind::cholesky, 2.0);
    const Csn q(p);
    Vector s(d);
    s << 0.3, -0.4;
    const TiltedMoments tm = q.tilted_moments(s);
    const Index n = opt.quick ? 200000 : 1000000;
    const Matrix x = q.sample(rng, n);
    Vector w(n);
    for (Index i = 0; i < n; ++i) w(i) = std::exp(s.dot(x.row(i).transpose()));
    const double m = w.mean();
    const double se = std::sqrt((w.array() - m).square().sum() / (n - 1) / n);
    double z = std::abs(m - std::exp(tm.log_m)) / se;
    // Tilted mean as a ratio estimator, with a delta-method error.
    for (Index j = 0; j < d; ++j) {
      const Vector wx = w.cwiseProduct(x.col(j));
      const double r = wx.mean() / m;
      const Vector resid = (wx.array() - r * w.array()) / m;
      const double se_r = std::sqrt(resid.squaredNorm() / (n - 1) / n);
      z = std::max(z, std::abs(r - tm.mean(j)) / se_r);
    }
    return CheckRow{"", z < 4.0, z, 4.0, "largest |z|, " + std::to_string(n) + " draws", 0.0};
  }));

  // Sampling moments: mean mu and covariance C C'.
  rows.push_back(detail::timed("sampling moments", [&] {
    RngStream rng(opt.seed + 37);
    const Index d = max_d >= 3 ? 3 : 2;
    const SkewParams p = detail::check_params(rng, d, FactorKind::lu);
    const Csn q(p);
    const Index n = opt.quick ? 200000 : 1000000;
    const Matrix x = q.sample(rng, n);
    const Matrix cov = q.covariance();
    double z = 0.0;
    const Vector mean = x.colwise().mean().transpose();
    const Matrix xc = x.rowwise() - mean.transpose();
    for (Index j = 0; j < d; ++j) {
      z = std::max(z, std::abs(mean(j) - p.mu(j)) / std::sqrt(cov(j, j) / n));
      for (Index k = 0; k <= j; ++k) {
        const Vector prod = xc.col(j).cwiseProduct(xc.col(k));
        const double c = prod.mean();
        const double se = std::sqrt((prod.array() - c).square().sum() / (n - 1) / n);
        z = std::max(z, std::abs(c - cov(j, k)) / se);
      }
    }
    return CheckRow{"", z < 4.0, z, 4.0, "largest |z|, " + std::to_string(n) + " draws", 0.0};
  }));
  return rows;
}

inline bool print_check_table(std::ostream& out, const std::vector<CheckRow>& rows) {
  std::size_t w = 4;
  for (const auto& r : rows) w = std::max(w, r.name.size());
  bool all = true;
  out << std::left << std::setw(static_cast<int>(w)) << "check"
      << "  result  measured      tolerance  seconds  note\n";
  for (const auto& r : rows) {
    all = all && r.pass;
    std::ostringstream m, t;
    m << std::setprecision(3) << std::scientific << r.measured;
    t << std::setprecision(0) << std::scientific << r.tolerance;
    out << std::left << std::setw(static_cast<int>(w)) << r.name << "  " << (r.pass ? "PASS  " : "FAIL  ") << "  "
        << std::setw(12) << m.str() << "  " << std::setw(9) << t.str() << "  " << std::right << std::fixed
        << std::setprecision(2) << std::setw(7) << r.seconds << "  " << std::left << r.note << "\n";
  }
  out << (all ? "all checks passed\n" : "some checks FAILED\n");
  return all;
}

}  // namespace csnvi
