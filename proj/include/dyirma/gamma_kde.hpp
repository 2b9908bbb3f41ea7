#pragma once

#include <Eigen/Core>
#include <optional>

#include "dyirma/errors.hpp"

namespace dyirma {

/// Multiplicative gamma-kernel density estimate over nonnegative support.
/// Kernel for dimension k at evaluation point x: the gamma density with
/// shape x_k/b_k + 1 and scale b_k, evaluated at the stored sample value.
/// Outside the axis-aligned coverage box of the stored points the estimate
/// is the constant floor epsilon.
class GammaKernelKde {
 public:
  /// points: M_p x d, all entries >= 0. Rows are sorted lexicographically at
  /// construction so summation order (and hence the result bits) never
  /// depends on input order.
  GammaKernelKde(Eigen::MatrixXd points, double epsilon,
                 std::optional<Eigen::VectorXd> bandwidth_override = std::nullopt);

  int dims() const { return static_cast<int>(points_.cols()); }
  int sample_count() const { return static_cast<int>(points_.rows()); }
  const Eigen::MatrixXd& points() const { return points_; }
  const Eigen::VectorXd& bandwidths() const { return bandwidths_; }
  double log_floor() const { return log_floor_; }
  const Eigen::VectorXd& box_min() const { return box_min_; }
  const Eigen::VectorXd& box_max() const { return box_max_; }

  bool in_coverage(const Eigen::VectorXd& x) const;

  /// Floored estimate: the kernel sum inside the coverage box, log epsilon
  /// outside; never below log epsilon.
  double log_density(const Eigen::VectorXd& x) const;

  /// Kernel sum everywhere, no coverage box and no floor.
  double log_density_raw(const Eigen::VectorXd& x) const;

 private:
  Eigen::MatrixXd points_;
  Eigen::MatrixXd log_points_;
  Eigen::VectorXd bandwidths_;
  Eigen::VectorXd box_min_, box_max_;
  double log_floor_ = 0.0;
};

/// Scott rule-of-thumb bandwidths b_k = M^(sign/(d+4)) * sd_k. sign defaults
/// to -1 (shrinking with sample size); +1 reproduces the growing variant.
/// Throws DomainError when a dimension has zero sample variance.
Eigen::VectorXd scott_bandwidths(const Eigen::MatrixXd& points, int exponent_sign = -1);

/// Fit with an explicit positive floor epsilon.
GammaKernelKde fit_gamma_kde(const Eigen::MatrixXd& points, double epsilon);

/// Fit with the data-driven floor exp(mean in-coverage log density - 10).
GammaKernelKde fit_gamma_kde(const Eigen::MatrixXd& points);

}  // namespace dyirma
