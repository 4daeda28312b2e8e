#pragma once

#include "csnvi/linalg.hpp"

#include <optional>
#include <string>
#include <vector>

namespace csnvi {

struct SkewParams;

/// Target posterior known up to its normalizer through log p(y, theta).
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual Index dim() const = 0;
  virtual double log_joint(const Vector& theta) const = 0;
  virtual Vector grad_log_joint(const Vector& theta) const = 0;

  /// E_q[log p(y, theta)] in closed form, when the model has one.
  virtual std::optional<double> closed_form_expected_logp(const SkewParams&) const { return std::nullopt; }

  /// Coordinates held at zero while searching for a starting mode. Models
  /// whose log joint is unbounded (hierarchical scales) pin their scale
  /// parameters here so the search finds a conditional mode instead.
  virtual std::vector<Index> start_fixed_coordinates() const { return {}; }

  virtual std::string name() const = 0;
};

}  // namespace csnvi
