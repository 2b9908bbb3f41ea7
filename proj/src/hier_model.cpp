#include "dyirma/hier_model.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace dyirma {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

std::string cov_kind_name(CovKind kind) {
  switch (kind) {
    case CovKind::IND: return "IND";
    case CovKind::CS: return "CS";
    case CovKind::UNS: return "UNS";
    case CovKind::AR1: return "AR1";
    case CovKind::TRI: return "TRI";
  }
  return "IND";
}

CovKind cov_kind_from_name(const std::string& name) {
  std::string s;
  for (char c : name) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (s == "IND") return CovKind::IND;
  if (s == "CS") return CovKind::CS;
  if (s == "UNS") return CovKind::UNS;
  if (s == "AR1") return CovKind::AR1;
  if (s == "TRI") return CovKind::TRI;
  throw ConfigError("unknown covariance kind '" + name + "' (allowed: ind, cs, uns, ar1, tri)");
}

bool cov_kind_has_rho(CovKind kind) {
  return kind == CovKind::CS || kind == CovKind::AR1 || kind == CovKind::TRI;
}

bool cov_kind_permutable(CovKind kind) {
  return kind == CovKind::AR1 || kind == CovKind::TRI;
}

DesignMatrix build_design(int seasons) {
  if (seasons < 2) throw DomainError("design matrix needs at least 2 seasons");
  DesignMatrix d;
  d.seasons = seasons;
  d.rows = Eigen::MatrixXd::Zero(seasons, seasons - 1);
  for (int j = 0; j < seasons; ++j)
    for (int k = 0; k < j; ++k) d.rows(j, k) = 1.0;
  return d;
}

std::vector<int> identity_perm(int n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

std::vector<int> positions_of(const std::vector<int>& perm) {
  std::vector<int> pos(perm.size(), -1);
  for (size_t k = 0; k < perm.size(); ++k) {
    const int seg = perm[k];
    if (seg < 0 || seg >= static_cast<int>(perm.size()) || pos[seg] != -1)
      throw DomainError("perm is not a bijection");
    pos[seg] = static_cast<int>(k);
  }
  return pos;
}

Eigen::MatrixXd materialize_covariance(const CovarianceSpec& spec, const std::vector<int>& perm,
                                       int segments) {
  const int n = segments;
  if (n < 1) throw DomainError("covariance needs at least one segment");
  Eigen::MatrixXd sigma(n, n);

  switch (spec.kind) {
    case CovKind::UNS: {
      if (spec.matrix.rows() != n || spec.matrix.cols() != n)
        throw ValidationError("UNS matrix has wrong shape");
      sigma = spec.matrix;
      break;
    }
    case CovKind::IND: {
      if (!(spec.sigma2 > 0.0)) throw PdViolationError("sigma2 must be positive");
      sigma = spec.sigma2 * Eigen::MatrixXd::Identity(n, n);
      break;
    }
    case CovKind::CS: {
      if (!(spec.sigma2 > 0.0)) throw PdViolationError("sigma2 must be positive");
      sigma.setConstant(spec.sigma2 * spec.rho);
      sigma.diagonal().setConstant(spec.sigma2);
      break;
    }
    case CovKind::AR1:
    case CovKind::TRI: {
      if (!(spec.sigma2 > 0.0)) throw PdViolationError("sigma2 must be positive");
      if (static_cast<int>(perm.size()) != n) throw DomainError("perm length mismatch");
      const std::vector<int> pos = positions_of(perm);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const int dist = std::abs(pos[i] - pos[j]);
          double v;
          if (spec.kind == CovKind::AR1) {
            v = dist == 0 ? 1.0 : std::pow(spec.rho, dist);
          } else {
            v = dist == 0 ? 1.0 : (dist == 1 ? spec.rho : 0.0);
          }
          sigma(i, j) = spec.sigma2 * v;
        }
      }
      break;
    }
  }

  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw PdViolationError("covariance (" + cov_kind_name(spec.kind) +
                           ") is not positive definite");
  return sigma;
}

double season_offset(int season, const HierParams& params) {
  double offset = 0.0;
  for (int k = 0; k < season && k < static_cast<int>(params.gamma.size()); ++k)
    if (params.gamma[k]) offset += params.beta(k);
  return offset;
}

Eigen::VectorXd season_mean(int season, const HierParams& params) {
  return (params.alpha.array() + season_offset(season, params)).matrix();
}

double SegmentConditional::log_density(const Eigen::VectorXd& t_row) const {
  const double inv2v = 0.5 / cond_var;
  const double log_norm = -0.5 * (kLogTwoPi + std::log(cond_var));
  double total = 0.0;
  for (long j = 0; j < t_row.size(); ++j) {
    const double r = t_row(j) - cond_mean(j);
    total += log_norm - r * r * inv2v;
  }
  return total;
}

SegmentConditional make_segment_conditional(int segment, const Eigen::MatrixXd& current,
                                            const HierParams& params,
                                            const Eigen::MatrixXd& sigma) {
  const int n = params.segments();
  const long seasons = current.cols();
  if (segment < 0 || segment >= n) throw DomainError("segment index out of range");

  SegmentConditional cond;
  cond.cond_mean.resize(seasons);

  if (n == 1) {
    cond.cond_var = sigma(0, 0);
    for (long j = 0; j < seasons; ++j)
      cond.cond_mean(j) = params.alpha(0) + season_offset(static_cast<int>(j), params);
    return cond;
  }

  // Partition Sigma around `segment`; w solves Sigma_{-i,-i} w = Sigma_{-i,i}.
  Eigen::MatrixXd s_rest(n - 1, n - 1);
  Eigen::VectorXd s_cross(n - 1);
  std::vector<int> rest;
  rest.reserve(n - 1);
  for (int i = 0; i < n; ++i)
    if (i != segment) rest.push_back(i);
  for (int a = 0; a < n - 1; ++a) {
    s_cross(a) = sigma(rest[a], segment);
    for (int b = 0; b < n - 1; ++b) s_rest(a, b) = sigma(rest[a], rest[b]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(s_rest);
  if (llt.info() != Eigen::Success)
    throw PdViolationError("conditional covariance block is not positive definite");
  const Eigen::VectorXd w = llt.solve(s_cross);
  cond.cond_var = sigma(segment, segment) - s_cross.dot(w);
  if (!(cond.cond_var > 0.0))
    throw PdViolationError("conditional variance is not positive");

  for (long j = 0; j < seasons; ++j) {
    const double offset = season_offset(static_cast<int>(j), params);
    double adj = 0.0;
    for (int a = 0; a < n - 1; ++a)
      adj += w(a) * (current(rest[a], j) - (params.alpha(rest[a]) + offset));
    cond.cond_mean(j) = params.alpha(segment) + offset + adj;
  }
  return cond;
}

double log_conditional_segment_density(int segment, const Eigen::VectorXd& t_row,
                                       const Eigen::MatrixXd& current, const HierParams& params) {
  const Eigen::MatrixXd sigma =
      materialize_covariance(params.cov, params.perm, params.segments());
  const SegmentConditional cond = make_segment_conditional(segment, current, params, sigma);
  if (t_row.size() != cond.cond_mean.size()) throw DomainError("season count mismatch");
  return cond.log_density(t_row);
}

double mvn_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& chol_lower) {
  const long n = x.size();
  const Eigen::VectorXd z = chol_lower.triangularView<Eigen::Lower>().solve(x - mean);
  double logdet = 0.0;
  for (long i = 0; i < n; ++i) logdet += std::log(chol_lower(i, i));
  return -0.5 * (static_cast<double>(n) * kLogTwoPi + z.squaredNorm()) - logdet;
}

}  // namespace dyirma
