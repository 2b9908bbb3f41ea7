#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "dyirma/errors.hpp"

namespace dyirma {

enum class CovKind { IND, CS, UNS, AR1, TRI };

std::string cov_kind_name(CovKind kind);
CovKind cov_kind_from_name(const std::string& name);
bool cov_kind_has_rho(CovKind kind);
bool cov_kind_permutable(CovKind kind);

/// Covariance specification across segments. sigma2/rho drive the scalar
/// structures, matrix holds the unstructured case.
struct CovarianceSpec {
  CovKind kind = CovKind::IND;
  double sigma2 = 1.0;   // IND, CS, AR1, TRI
  double rho = 0.0;      // CS, AR1, TRI; in [0, 1)
  Eigen::MatrixXd matrix;  // UNS only
};

/// Snapshot of the hierarchical parameters.
///   alpha: n segment effects, beta: J-1 season jump effects,
///   gamma: J-1 inclusion indicators, perm: position -> segment index.
struct HierParams {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  std::vector<int> gamma;
  CovarianceSpec cov;
  std::vector<int> perm;

  int segments() const { return static_cast<int>(alpha.size()); }
  int seasons() const { return static_cast<int>(beta.size()) + 1; }
};

/// Additive cumulative design over seasons: row j (0-based) has its first j
/// entries equal to 1. Column k is the jump between seasons k and k+1.
struct DesignMatrix {
  int seasons = 0;
  Eigen::MatrixXd rows;  // J x (J-1)
};

DesignMatrix build_design(int seasons);

/// Identity permutation of length n.
std::vector<int> identity_perm(int n);

/// Position of each segment under `perm` (inverse permutation).
std::vector<int> positions_of(const std::vector<int>& perm);

/// Materializes the n x n covariance for a spec under a segment permutation.
/// Throws PdViolationError when the result fails the Cholesky PD check
/// (e.g. TRI with rho >= 1/(2 cos(pi/(n+1)))). UNS ignores the permutation.
Eigen::MatrixXd materialize_covariance(const CovarianceSpec& spec, const std::vector<int>& perm,
                                       int segments);

/// Cumulative season offset sum_{k < season} gamma_k beta_k.
double season_offset(int season, const HierParams& params);

/// Mean vector alpha + season_offset * 1 for a season (0-based).
Eigen::VectorXd season_mean(int season, const HierParams& params);

/// Per-segment conditional slice of N(season_mean, Sigma): same variance for
/// every season, season-specific means given the other segments' values.
struct SegmentConditional {
  Eigen::VectorXd cond_mean;  // J entries
  double cond_var = 1.0;

  double log_density(const Eigen::VectorXd& t_row) const;
};

/// Builds the exact conditional of component `segment` given the remaining
/// rows of `current` (n x J matrix of the currently selected values).
/// `sigma` must be the materialized covariance for params.
SegmentConditional make_segment_conditional(int segment, const Eigen::MatrixXd& current,
                                            const HierParams& params,
                                            const Eigen::MatrixXd& sigma);

/// log P(T_i. | T_-i., params): sum over seasons of the exact univariate
/// conditional normal density. Reduces to the marginal when Sigma is diagonal.
double log_conditional_segment_density(int segment, const Eigen::VectorXd& t_row,
                                       const Eigen::MatrixXd& current, const HierParams& params);

/// Multivariate normal log density of an n-vector given mean and an already
/// factored covariance (lower Cholesky factor).
double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& chol_lower);

}  // namespace dyirma
