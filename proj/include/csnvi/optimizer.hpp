#pragma once

// Stochastic gradient ascent on the ELBO: Adam in Euclidean coordinates or a
// constant-step natural gradient, with windowed ELBO traces.

#include "csnvi/family.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace csnvi {

enum class StepMode { euclidean_adam, natural_constant };

inline std::string_view to_string(StepMode m) { return m == StepMode::euclidean_adam ? "euclidean-adam" : "natural-constant"; }

inline StepMode step_mode_from_string(std::string_view s) {
  if (s == "euclidean-adam" || s == "adam") return StepMode::euclidean_adam;
  if (s == "natural-constant" || s == "natural") return StepMode::natural_constant;
  throw std::invalid_argument("unknown step mode: " + std::string(s));
}

struct OptimizerConfig {
  StepMode mode = StepMode::euclidean_adam;
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long iterations = 50000;
  int mc_samples_per_step = 1;
  long trace_window = 1000;
  std::uint64_t seed = 1;
  Vector skew_init = Vector::Constant(1, 1.0);  // lambda-space; one entry is broadcast
  SkewKind parametrization = SkewKind::alpha_cubed;
  FactorKind factor = FactorKind::cholesky;
  bool update_skew = true;
  bool plateau_stop = false;
  double plateau_tol = 1e-4;
  int plateau_windows = 5;
  bool snapshot_params = false;
  int threads = 1;

  void validate() const {
    if (!(step > 0)) throw std::invalid_argument("optimizer: step must be positive");
    if (trace_window < 1) throw std::invalid_argument("optimizer: trace_window must be at least 1");
    if (iterations < 0) throw std::invalid_argument("optimizer: negative iteration count");
    if (mc_samples_per_step < 1) throw std::invalid_argument("optimizer: mc_samples_per_step must be at least 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0))
      throw std::invalid_argument("optimizer: Adam constants out of range");
  }
};

struct TraceRecord {
  long window_index = 0;
  long iteration = 0;          // iterations completed at the end of the window
  double mean_elbo = 0.0;      // mean of trace_window raw estimates
  double std_error = 0.0;
  double wall_time = 0.0;      // seconds since the start of the fit
  Vector skew;                 // lambda values, all blocks concatenated
  std::optional<Vector> params;
};

struct FitResult {
  Family family;
  double final_elbo = 0.0;     // mean of the last window
  double final_std_error = 0.0;
  std::vector<TraceRecord> trace;
  long iterations = 0;
  bool converged = false;

  const SkewParams& params() const { return family.blocks.front(); }
};

/// Raised when a gradient or iterate stops being finite.
class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, long iteration, Vector snapshot)
      : std::runtime_error(what), iteration_(iteration), snapshot_(std::move(snapshot)) {}
  long iteration() const { return iteration_; }
  const Vector& snapshot() const { return snapshot_; }

 private:
  long iteration_;
  Vector snapshot_;
};

struct AdamState {
  Vector m, v;
  long t = 0;

  explicit AdamState(Index n = 0) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}
};

/// Bias-corrected Adam ascent step; returns the update to add to the iterate.
inline Vector adam_step(AdamState& s, const Vector& grad, double step, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8) {
  if (s.m.size() != grad.size()) throw std::invalid_argument("adam: state and gradient sizes differ");
  ++s.t;
  s.m = beta1 * s.m + (1 - beta1) * grad;
  s.v = beta2 * s.v + (1 - beta2) * grad.cwiseAbs2();
  const double c1 = 1 - std::pow(beta1, static_cast<double>(s.t));
  const double c2 = 1 - std::pow(beta2, static_cast<double>(s.t));
  return step * (s.m / c1).array() / ((s.v / c2).array().sqrt() + eps);
}

struct ElboEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  bool closed_form = false;
};

/// ELBO of a family: closed form when the model has one (dense family only),
/// else a Monte Carlo mean of h over n_samples draws.
inline ElboEstimate elbo_monte_carlo(const Family& f, const TargetModel& model, long n_samples, RngStream& rng) {
  const FamilyDensity q(f);
  if (n_samples < 2) throw std::invalid_argument("elbo_estimate: need at least two draws");
  double s = 0.0, s2 = 0.0;
  for (long k = 0; k < n_samples; ++k) {
    const Vector theta = q.transform(q.draw_noise(rng));
    const double h = model.log_joint(theta) - q.log_density(theta);
    s += h;
    s2 += h * h;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = s / n;
  return {mean, std::sqrt(std::max(0.0, s2 / n - mean * mean) / (n - 1)), false};
}

inline ElboEstimate elbo_estimate(const Family& f, const TargetModel& model, long n_samples, RngStream& rng) {
  if (f.dense())
    if (auto e = model.closed_form_expected_logp(f.blocks.front())) return {*e + Csn(f.blocks.front()).entropy(), 0.0, true};
  return elbo_monte_carlo(f, model, n_samples, rng);
}

inline ElboEstimate elbo_estimate(const SkewParams& p, const TargetModel& model, long n_samples, RngStream& rng) {
  return elbo_estimate(Family(p), model, n_samples, rng);
}

namespace detail {

/// Below this |alpha| the alpha^3 (or lambda^3) chain rule is treated as
/// singular and the coordinate steps in lambda instead.
inline constexpr double kCubedFallback = 1e-4;

inline Vector broadcast_skew(const Vector& init, Index d) {
  if (init.size() == d) return init;
  if (init.size() == 1) return Vector::Constant(d, init(0));
  throw std::invalid_argument("skew_init must have one entry or one per coordinate");
}

/// Per-coordinate record of which skew entries step in lambda space.
inline std::vector<bool> lambda_fallback(const SkewParams& p) {
  std::vector<bool> out(p.dim(), false);
  if (p.skew.kind == SkewKind::lambda) return out;
  const Vector lam = to_lambda(p.skew);
  const AuxQuantities ax = aux_from_lambda(lam);
  for (Index i = 0; i < p.dim(); ++i) {
    const double v = p.skew.kind == SkewKind::alpha_cubed ? ax.alpha(i) : lam(i);
    out[i] = std::abs(v) < kCubedFallback;
  }
  return out;
}

/// Converts a lambda-space gradient block into the step direction for the
/// block's own coordinates.
inline ParamGradient direction(const ParamGradient& g_lambda, const SkewParams& p, StepMode mode,
                               const std::vector<bool>& fallback) {
  ParamGradient g = mode == StepMode::natural_constant ? natural_grad(g_lambda, p) : g_lambda;
  if (p.skew.kind == SkewKind::lambda) return g;
  const Vector lam = to_lambda(p.skew);
  const AuxQuantities ax = aux_from_lambda(lam);
  const Vector jac = p.skew.kind == SkewKind::alpha_cubed ? alpha_cubed_jacobian(ax) : lambda_cubed_jacobian(lam);
  for (Index i = 0; i < p.dim(); ++i) {
    if (fallback[i]) continue;
    // Natural gradients transform with the Jacobian, Euclidean ones with its inverse.
    g.d_skew(i) = mode == StepMode::natural_constant ? g.d_skew(i) * jac(i) : g.d_skew(i) / jac(i);
  }
  return g;
}

/// Applies a flat update to a block, stepping fallback coordinates in lambda.
inline SkewParams apply_update(const SkewParams& p, const Vector& upd, const std::vector<bool>& fallback) {
  const Index d = p.dim();
  Vector x = flatten_params(p) + upd;
  bool any = false;
  for (bool b : fallback) any = any || b;
  if (any) {
    Vector lam = to_lambda(p.skew);
    for (Index i = 0; i < d; ++i) lam(i) += upd(d + i);
    const Vector conv = from_lambda(lam, p.skew.kind).value;
    for (Index i = 0; i < d; ++i)
      if (fallback[i]) x(d + i) = conv(i);
  }
  SkewParams out = unflatten_params(x, d, p.factor.kind(), p.skew.kind);
  if (out.skew.kind == SkewKind::alpha_cubed) out.skew = clip_to_domain(out.skew);
  return out;
}

inline Vector lambda_snapshot(const Family& f) {
  Vector out(f.dim());
  Index at = 0;
  for (const auto& b : f.blocks) {
    out.segment(at, b.dim()) = to_lambda(b.skew);
    at += b.dim();
  }
  return out;
}

inline bool plateaued(const std::vector<TraceRecord>& t, int windows, double tol) {
  if (static_cast<int>(t.size()) < windows + 1) return false;
  const double ref = t[t.size() - 1 - windows].mean_elbo;
  for (std::size_t k = t.size() - windows; k < t.size(); ++k)
    if (std::abs(t[k].mean_elbo - ref) > tol * std::max(1.0, std::abs(ref))) return false;
  return true;
}

}  // namespace detail

/// Runs the ascent loop from a given starting family. Noise for each step is
/// drawn sequentially from one stream, so results do not depend on threads.
inline FitResult optimize(Family start, const TargetModel& model, const OptimizerConfig& cfg) {
  cfg.validate();
  if (start.dim() != model.dim()) throw std::invalid_argument("optimizer: model and family dimensions differ");
  RngStream rng(cfg.seed);
  Family fam = std::move(start);
  const Index np = fam.param_size();
  AdamState adam(np);
  FitResult res;
  const auto t0 = std::chrono::steady_clock::now();
  double wsum = 0.0, wsum2 = 0.0;
  long wcount = 0;
  const int threads = std::max(1, cfg.threads);

  for (long it = 0; it < cfg.iterations; ++it) {
    const FamilyDensity q(fam);
    const int m = cfg.mc_samples_per_step;
    std::vector<std::vector<NoisePair>> noise(m);
    for (int k = 0; k < m; ++k) noise[k] = q.draw_noise(rng);
    std::vector<FamilyGradientSample> draws(m);
    if (threads > 1 && m > 1) {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
          for (int k = w; k < m; k += threads) draws[k] = family_grad_sample(q, model, noise[k]);
        });
      for (auto& th : pool) th.join();
    } else {
      for (int k = 0; k < m; ++k) draws[k] = family_grad_sample(q, model, noise[k]);
    }

    double h = 0.0;
    std::vector<ParamGradient> g = draws[0].grads;
    h += draws[0].h;
    for (int k = 1; k < m; ++k) {
      for (std::size_t b = 0; b < g.size(); ++b) g[b] += draws[k].grads[b];
      h += draws[k].h;
    }
    h /= m;

    Vector dir(np);
    std::vector<std::vector<bool>> fallback(fam.blocks.size());
    Index at = 0;
    for (std::size_t b = 0; b < g.size(); ++b) {
      g[b] *= 1.0 / m;
      if (!cfg.update_skew) g[b].d_skew.setZero();
      const SkewParams& p = fam.blocks[b];
      fallback[b] = detail::lambda_fallback(p);
      const Vector v = detail::direction(g[b], p, cfg.mode, fallback[b]).flatten();
      dir.segment(at, v.size()) = v;
      at += v.size();
    }
    if (!dir.allFinite() || !std::isfinite(h))
      throw NumericalAbort("non-finite gradient at iteration " + std::to_string(it), it, fam.flatten());

    const Vector upd = cfg.mode == StepMode::euclidean_adam
                           ? adam_step(adam, dir, cfg.step, cfg.beta1, cfg.beta2, cfg.eps)
                           : Vector(cfg.step * dir);
    at = 0;
    for (std::size_t b = 0; b < fam.blocks.size(); ++b) {
      const Index n = flatten_params(fam.blocks[b]).size();
      fam.blocks[b] = detail::apply_update(fam.blocks[b], upd.segment(at, n), fallback[b]);
      at += n;
    }
    if (!fam.flatten().allFinite())
      throw NumericalAbort("non-finite parameters at iteration " + std::to_string(it), it, fam.flatten());

    wsum += h;
    wsum2 += h * h;
    ++wcount;
    if (wcount == cfg.trace_window || it + 1 == cfg.iterations) {
      TraceRecord r;
      r.window_index = static_cast<long>(res.trace.size());
      r.iteration = it + 1;
      const double n = static_cast<double>(wcount);
      r.mean_elbo = wsum / n;
      r.std_error = wcount > 1 ? std::sqrt(std::max(0.0, wsum2 / n - r.mean_elbo * r.mean_elbo) / (n - 1)) : 0.0;
      r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      r.skew = detail::lambda_snapshot(fam);
      if (cfg.snapshot_params) r.params = fam.flatten();
      res.trace.push_back(std::move(r));
      wsum = wsum2 = 0.0;
      wcount = 0;
      if (detail::plateaued(res.trace, cfg.plateau_windows, cfg.plateau_tol)) {
        res.converged = true;
        if (cfg.plateau_stop) {
          res.iterations = it + 1;
          break;
        }
      }
    }
    res.iterations = it + 1;
  }
  res.family = std::move(fam);
  if (!res.trace.empty()) {
    res.final_elbo = res.trace.back().mean_elbo;
    res.final_std_error = res.trace.back().std_error;
  }
  return res;
}

/// Deterministic Gaussian starting point: Levenberg-Marquardt damped Newton
/// ascent on the log joint to its mode, then the inverse negative Hessian for
/// the scale where it is positive definite. Mean-field layouts use only the
/// block-diagonal curvature. Coordinates the model pins for the start stay at 0
/// during the search.
inline std::pair<Vector, std::vector<Matrix>> laplace_start(const TargetModel& model, const std::vector<Index>& sizes,
                                                            int max_iter = 500) {
  const Index d = model.dim();
  Vector x = Vector::Zero(d);
  std::vector<bool> pinned(d, false);
  for (Index k : model.start_fixed_coordinates()) pinned.at(k) = true;
  const auto hessian_blocks = [&](const Vector& at) {
    std::vector<Matrix> hb;
    Index off = 0;
    for (Index s : sizes) {
      Matrix h(s, s);
      for (Index j = 0; j < s; ++j) {
        const double e = 1e-5 * std::max(1.0, std::abs(at(off + j)));
        Vector a = at, b = at;
        a(off + j) += e;
        b(off + j) -= e;
        h.col(j) = (model.grad_log_joint(a).segment(off, s) - model.grad_log_joint(b).segment(off, s)) / (2 * e);
      }
      hb.push_back(0.5 * (h + h.transpose()));
      off += s;
    }
    return hb;
  };
  double f = model.log_joint(x);
  double damping = 1e-3;
  for (int it = 0; it < max_iter; ++it) {
    Vector g = model.grad_log_joint(x);
    for (Index k = 0; k < d; ++k)
      if (pinned[k]) g(k) = 0.0;
    if (g.cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, std::abs(f))) break;
    const auto hb = hessian_blocks(x);
    bool accepted = false;
    for (int tries = 0; tries < 60 && !accepted; ++tries) {
      Vector dir(d);
      Index off = 0;
      bool ok = true;
      for (std::size_t b = 0; b < sizes.size() && ok; ++b) {
        const Index s = sizes[b];
        Matrix a = -hb[b];
        for (Index k = 0; k < s; ++k)
          if (pinned[off + k]) {
            a.row(k).setZero();
            a.col(k).setZero();
            a(k, k) = 1.0;
          }
        a.diagonal().array() += damping * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
        Eigen::LLT<Matrix> llt(a);
        ok = llt.info() == Eigen::Success;
        if (ok) dir.segment(off, s) = llt.solve(g.segment(off, s));
        off += s;
      }
      if (ok) {
        const Vector xn = x + dir;
        const double fn = model.log_joint(xn);
        if (std::isfinite(fn) && fn >= f) {
          accepted = true;
          const bool tiny = dir.cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff());
          x = xn;
          f = fn;
          damping = std::max(damping / 3.0, 1e-12);
          if (tiny) it = max_iter;
          continue;
        }
      }
      damping *= 4.0;
    }
    if (!accepted) break;
  }
  std::vector<Matrix> chol;
  for (const Matrix& h : hessian_blocks(x)) {
    Eigen::LLT<Matrix> llt(-h);
    if (llt.info() == Eigen::Success) {
      const Matrix cov = llt.solve(Matrix::Identity(h.rows(), h.rows()));
      chol.push_back(Eigen::LLT<Matrix>(cov).matrixL());
    } else {
      chol.push_back(0.1 * Matrix::Identity(h.rows(), h.rows()));
    }
  }
  return {x, chol};
}

inline std::vector<Index> dense_sizes(const TargetModel& model) { return {model.dim()}; }

/// Gaussian fit: the CSN loop in lambda coordinates with the skew pinned at 0.
inline FitResult fit_gaussian(const TargetModel& model, OptimizerConfig cfg, std::optional<Family> start = std::nullopt,
                              const std::vector<Index>& sizes = {}) {
  const std::vector<Index> sz = sizes.empty() ? dense_sizes(model) : sizes;
  if (!start) {
    const auto [mu, chol] = laplace_start(model, sz);
    start = initial_family(sz, mu, chol, cfg.factor, SkewKind::lambda);
  }
  Family f = *start;
  for (auto& b : f.blocks) b.skew = SkewParam::lambda(Vector::Zero(b.dim()));
  cfg.parametrization = SkewKind::lambda;
  cfg.update_skew = false;
  return optimize(std::move(f), model, cfg);
}

/// Starting family for a CSN fit from a Gaussian one: same mean and scale
/// (L = C and U = I for the LU form), skew injected in lambda then converted.
inline Family csn_start(const Family& gaussian, const OptimizerConfig& cfg) {
  Family f;
  for (const auto& b : gaussian.blocks) {
    const Index d = b.dim();
    const Matrix c = b.factor.c();
    FactorForm ff = b.factor;
    if (cfg.factor == FactorKind::lu && b.factor.kind() == FactorKind::cholesky)
      ff = FactorForm::lu(c, Matrix::Identity(d, d));
    else if (cfg.factor == FactorKind::cholesky && b.factor.kind() == FactorKind::lu)
      ff = FactorForm::cholesky(Eigen::LLT<Matrix>(c * c.transpose()).matrixL());
    SkewParam sk = from_lambda(detail::broadcast_skew(cfg.skew_init, d), cfg.parametrization);
    if (sk.kind == SkewKind::alpha_cubed) sk = clip_to_domain(sk);
    f.blocks.push_back({b.mu, ff, sk});
  }
  return f;
}

/// CSN fit warm-started from a Gaussian fit (run here if none is given).
inline FitResult fit_csn(const TargetModel& model, const OptimizerConfig& cfg, const std::optional<FitResult>& warm = std::nullopt,
                         const std::vector<Index>& sizes = {}) {
  Family g;
  if (warm) {
    g = warm->family;
  } else {
    const std::vector<Index> sz = sizes.empty() ? dense_sizes(model) : sizes;
    const auto [mu, chol] = laplace_start(model, sz);
    g = initial_family(sz, mu, chol, FactorKind::cholesky, SkewKind::lambda);
  }
  return optimize(csn_start(g, cfg), model, cfg);
}

}  // namespace csnvi
