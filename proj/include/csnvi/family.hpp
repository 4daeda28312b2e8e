#pragma once

// Block-diagonal variational family: independent CSN factors over consecutive
// coordinate blocks. A single block is the dense family.

#include "csnvi/gradient.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace csnvi {

struct Family {
  std::vector<SkewParams> blocks;

  Family() = default;
  explicit Family(SkewParams p) { blocks.push_back(std::move(p)); }
  explicit Family(std::vector<SkewParams> b) : blocks(std::move(b)) {}

  Index dim() const {
    Index d = 0;
    for (const auto& b : blocks) d += b.dim();
    return d;
  }
  bool dense() const { return blocks.size() == 1; }
  FactorKind factor_kind() const { return blocks.front().factor.kind(); }
  SkewKind skew_kind() const { return blocks.front().skew.kind; }

  /// First coordinate of each block.
  std::vector<Index> offsets() const {
    std::vector<Index> o;
    Index at = 0;
    for (const auto& b : blocks) o.push_back(at), at += b.dim();
    return o;
  }

  Index param_size() const {
    Index n = 0;
    for (const auto& b : blocks) n += flatten_params(b).size();
    return n;
  }

  Vector flatten() const {
    Vector out(param_size());
    Index at = 0;
    for (const auto& b : blocks) {
      const Vector f = flatten_params(b);
      out.segment(at, f.size()) = f;
      at += f.size();
    }
    return out;
  }

  /// Same block shapes, new flat values.
  Family with_values(const Vector& x) const {
    if (x.size() != param_size()) throw std::invalid_argument("family: flat vector has wrong length");
    Family out;
    Index at = 0;
    for (const auto& b : blocks) {
      const Index n = flatten_params(b).size();
      out.blocks.push_back(unflatten_params(x.segment(at, n), b.dim(), b.factor.kind(), b.skew.kind));
      at += n;
    }
    return out;
  }
};

/// Layout for n subject blocks of size r followed by one global block.
struct MeanFieldLayout {
  Index subjects = 0;
  Index random_dim = 0;
  Index global_dim = 0;

  Index dim() const { return subjects * random_dim + global_dim; }
  Index blocks() const { return subjects + (global_dim > 0 ? 1 : 0); }

  std::vector<Index> block_sizes() const {
    std::vector<Index> s(subjects, random_dim);
    if (global_dim > 0) s.push_back(global_dim);
    return s;
  }
};

inline MeanFieldLayout meanfield_structure(Index subjects, Index random_dim, Index global_dim) {
  if (subjects < 0 || random_dim < 0 || global_dim < 0) throw std::invalid_argument("mean-field layout: negative size");
  if (subjects > 0 && random_dim == 0) throw std::invalid_argument("mean-field layout: subjects need a random-effect dimension");
  return {subjects, random_dim, global_dim};
}

/// Gaussian-shaped starting family: given means, per-block scale, zero skew.
inline Family initial_family(const std::vector<Index>& sizes, const Vector& mu, const std::vector<Matrix>& chol,
                             FactorKind fk, SkewKind sk) {
  Family f;
  Index at = 0;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    const Index d = sizes[b];
    const FactorForm ff = fk == FactorKind::cholesky ? FactorForm::cholesky(chol[b]) : FactorForm::lu(chol[b], Matrix::Identity(d, d));
    f.blocks.push_back({mu.segment(at, d), ff, SkewParam{sk, Vector::Zero(d)}});
    at += d;
  }
  return f;
}

/// Cached per-block densities for evaluating and differentiating log q.
class FamilyDensity {
 public:
  explicit FamilyDensity(const Family& f) : offsets_(f.offsets()) {
    for (const auto& b : f.blocks) q_.emplace_back(b);
  }

  const std::vector<Csn>& blocks() const { return q_; }
  const std::vector<Index>& offsets() const { return offsets_; }

  Index dim() const { return offsets_.empty() ? 0 : offsets_.back() + q_.back().dim(); }

  double log_density(const Vector& theta) const {
    double s = 0.0;
    for (std::size_t b = 0; b < q_.size(); ++b) s += q_[b].log_density(theta.segment(offsets_[b], q_[b].dim()));
    return s;
  }

  Vector grad_log_density(const Vector& theta) const {
    Vector g(theta.size());
    for (std::size_t b = 0; b < q_.size(); ++b)
      g.segment(offsets_[b], q_[b].dim()) = q_[b].grad_log_density(theta.segment(offsets_[b], q_[b].dim()));
    return g;
  }

  double entropy() const {
    double s = 0.0;
    for (const auto& q : q_) s += q.entropy();
    return s;
  }

  /// One noise pair per block, drawn block by block (w1 then w2).
  std::vector<NoisePair> draw_noise(RngStream& rng) const {
    std::vector<NoisePair> n;
    n.reserve(q_.size());
    for (const auto& q : q_) n.push_back(NoisePair::draw(rng, q.dim()));
    return n;
  }

  Vector transform(const std::vector<NoisePair>& noise) const {
    Vector theta(dim());
    for (std::size_t b = 0; b < q_.size(); ++b)
      theta.segment(offsets_[b], q_[b].dim()) = q_[b].transform(noise[b].w1, noise[b].w2);
    return theta;
  }

  /// n joint draws as rows.
  Matrix sample(RngStream& rng, Index n) const {
    if (n < 0) throw std::invalid_argument("sample: negative count");
    Matrix out(n, dim());
    for (Index k = 0; k < n; ++k) out.row(k) = transform(draw_noise(rng)).transpose();
    return out;
  }

 private:
  std::vector<Csn> q_;
  std::vector<Index> offsets_;
};

/// Per-draw estimate over the whole family: lambda-space gradient of every
/// block and the integrand h = log p - log q.
struct FamilyGradientSample {
  std::vector<ParamGradient> grads;
  double h = 0.0;
};

inline FamilyGradientSample family_grad_sample(const FamilyDensity& q, const TargetModel& model,
                                               const std::vector<NoisePair>& noise) {
  if (model.dim() != q.dim()) throw std::invalid_argument("gradient: model and family dimensions differ");
  const Vector theta = q.transform(noise);
  FamilyGradientSample out;
  out.h = model.log_joint(theta) - q.log_density(theta);
  const Vector gh = model.grad_log_joint(theta) - q.grad_log_density(theta);
  const auto& blocks = q.blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b)
    out.grads.push_back(pathwise_param_grad(blocks[b], gh.segment(q.offsets()[b], blocks[b].dim()), noise[b]));
  return out;
}

}  // namespace csnvi
