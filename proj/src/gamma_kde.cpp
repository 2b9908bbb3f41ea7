#include "dyirma/gamma_kde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace dyirma {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_points(const Eigen::MatrixXd& points) {
  if (points.rows() < 2) throw ValidationError("at least 2 prior samples required");
  if (points.cols() < 1) throw ValidationError("kde needs at least one dimension");
  if (!points.allFinite() || (points.array() < 0.0).any())
    throw ValidationError("gamma kernels require finite nonnegative samples");
}

Eigen::MatrixXd sort_rows(Eigen::MatrixXd points) {
  const long rows = points.rows();
  std::vector<long> order(rows);
  std::iota(order.begin(), order.end(), 0L);
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    for (long c = 0; c < points.cols(); ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  });
  Eigen::MatrixXd out(rows, points.cols());
  for (long r = 0; r < rows; ++r) out.row(r) = points.row(order[r]);
  return out;
}

}  // namespace

Eigen::VectorXd scott_bandwidths(const Eigen::MatrixXd& points, int exponent_sign) {
  check_points(points);
  if (exponent_sign != -1 && exponent_sign != 1)
    throw DomainError("scott exponent sign must be -1 or +1");
  const double m = static_cast<double>(points.rows());
  const double d = static_cast<double>(points.cols());
  const double factor = std::pow(m, static_cast<double>(exponent_sign) / (d + 4.0));
  Eigen::VectorXd b(points.cols());
  for (long k = 0; k < points.cols(); ++k) {
    const double mean = points.col(k).mean();
    const double ss = (points.col(k).array() - mean).square().sum();
    const double sd = std::sqrt(ss / (m - 1.0));
    if (!(sd > 0.0))
      throw DomainError("degenerate dimension " + std::to_string(k + 1) +
                        ": zero sample variance");
    b(k) = factor * sd;
  }
  return b;
}

GammaKernelKde::GammaKernelKde(Eigen::MatrixXd points, double epsilon,
                               std::optional<Eigen::VectorXd> bandwidth_override) {
  check_points(points);
  if (!(epsilon > 0.0)) throw ValidationError("floor must be positive");
  points_ = sort_rows(std::move(points));
  if (bandwidth_override) {
    if (bandwidth_override->size() != points_.cols())
      throw ValidationError("bandwidth override dimension mismatch");
    if ((bandwidth_override->array() <= 0.0).any())
      throw ValidationError("bandwidths must be positive");
    bandwidths_ = *bandwidth_override;
  } else {
    bandwidths_ = scott_bandwidths(points_);
  }
  log_floor_ = std::log(epsilon);
  if (!std::isfinite(log_floor_)) throw ValidationError("floor must yield a finite log");
  box_min_ = points_.colwise().minCoeff();
  box_max_ = points_.colwise().maxCoeff();
  log_points_ = points_.array().log().matrix();  // -inf rows where a point is 0
}

bool GammaKernelKde::in_coverage(const Eigen::VectorXd& x) const {
  for (long k = 0; k < x.size(); ++k)
    if (x(k) < box_min_(k) || x(k) > box_max_(k)) return false;
  return true;
}

double GammaKernelKde::log_density_raw(const Eigen::VectorXd& x) const {
  if (x.size() != points_.cols()) throw DomainError("kde evaluation dimension mismatch");
  for (long k = 0; k < x.size(); ++k)
    if (!(x(k) >= 0.0) || !std::isfinite(x(k)))
      throw DomainError("kde evaluation point must be finite and nonnegative");

  const long m = points_.rows();
  const long d = points_.cols();

  // Per-dimension constants of the kernel: shape a_k = x_k/b_k + 1, scale b_k.
  Eigen::VectorXd shape_m1(d), log_norm(d);
  for (long k = 0; k < d; ++k) {
    const double b = bandwidths_(k);
    const double a = x(k) / b + 1.0;
    shape_m1(k) = a - 1.0;
    log_norm(k) = -a * std::log(b) - std::lgamma(a);
  }

  double max_term = kNegInf;
  Eigen::VectorXd terms(m);
  for (long r = 0; r < m; ++r) {
    double s = 0.0;
    for (long k = 0; k < d; ++k) {
      const double t = points_(r, k);
      double lk;
      if (shape_m1(k) == 0.0) {
        lk = -t / bandwidths_(k) + log_norm(k);
      } else if (t == 0.0) {
        lk = kNegInf;
      } else {
        lk = shape_m1(k) * log_points_(r, k) - t / bandwidths_(k) + log_norm(k);
      }
      s += lk;
      if (s == kNegInf) break;
    }
    terms(r) = s;
    max_term = std::max(max_term, s);
  }
  if (max_term == kNegInf) return kNegInf;
  double acc = 0.0;
  for (long r = 0; r < m; ++r) acc += std::exp(terms(r) - max_term);
  return max_term + std::log(acc) - std::log(static_cast<double>(m));
}

double GammaKernelKde::log_density(const Eigen::VectorXd& x) const {
  if (x.size() != points_.cols()) throw DomainError("kde evaluation dimension mismatch");
  for (long k = 0; k < x.size(); ++k)
    if (!(x(k) >= 0.0) || !std::isfinite(x(k)))
      throw DomainError("kde evaluation point must be finite and nonnegative");
  if (!in_coverage(x)) return log_floor_;
  return std::max(log_density_raw(x), log_floor_);
}

GammaKernelKde fit_gamma_kde(const Eigen::MatrixXd& points, double epsilon) {
  return GammaKernelKde(points, epsilon);
}

GammaKernelKde fit_gamma_kde(const Eigen::MatrixXd& points) {
  // Provisional floor, then re-fit with exp(mean log density at the stored
  // points - 10). Capped evaluation count keeps the default path cheap.
  GammaKernelKde provisional(points, std::numeric_limits<double>::min());
  const long m = provisional.sample_count();
  const long step = std::max(1L, m / 256);
  double acc = 0.0;
  long used = 0;
  for (long r = 0; r < m; r += step) {
    const double ld = provisional.log_density_raw(provisional.points().row(r).transpose());
    if (std::isfinite(ld)) {
      acc += ld;
      ++used;
    }
  }
  const double mean_ld = used > 0 ? acc / static_cast<double>(used) : 0.0;
  const double eps = std::exp(mean_ld - 10.0);
  return GammaKernelKde(points, std::max(eps, std::numeric_limits<double>::min()));
}

}  // namespace dyirma
