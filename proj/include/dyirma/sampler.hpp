#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "dyirma/coalescent.hpp"
#include "dyirma/gamma_kde.hpp"
#include "dyirma/hier_model.hpp"
#include "dyirma/realization_io.hpp"
#include "dyirma/trace.hpp"

namespace dyirma {

/// Hyperprior constants for the Gibbs blocks. Defaults are weakly
/// informative; every value is configurable.
struct Hyperpriors {
  double mu_beta = 0.0;
  double tau_beta = 0.01;
  double p_inclusion = 0.5;
  double mu_alpha = 0.0;
  double tau_alpha = 0.01;
  double wishart_nu = 0.0;     // <= 0 selects n + 1 at run time
  Eigen::MatrixXd wishart_r;   // empty selects the identity
  double ig_shape = 2.0;
  double ig_scale = 1.0;
  double rho_a = 1.0;
  double rho_b = 1.0;

  void validate(int segments) const;
};

struct SamplerConfig {
  long iterations = 10000;
  double burn_in_fraction = 0.1;
  int thinning = 1;
  int chains = 1;
  std::uint64_t seed = 0;
  Hyperpriors hyper;

  CovKind cov_kind = CovKind::IND;
  bool permute = false;
  bool estimate_covariance = true;
  double init_sigma2 = 1.0;
  double init_rho = 0.25;
  Eigen::MatrixXd init_cov_matrix;  // UNS start value; empty selects identity
  double mh_step_sigma2 = 0.2;
  double mh_step_rho = 0.2;

  /// Validation hook: replaces the data likelihood by a constant, so each
  /// Gibbs/MH block samples from its prior and the permutation walk is
  /// uniform. Never set outside tests.
  bool flat_likelihood = false;

  long burn_iterations() const;
  long retained_draws() const;
  void validate() const;
};

struct ChainDiagnostics {
  std::uint64_t seed = 0;
  long iterations = 0;
  long cov_attempts = 0;
  long cov_accepts = 0;
  long perm_attempts = 0;
  long perm_accepts = 0;
  double ess_q05 = 0.0;
  double ess_q50 = 0.0;
  double ess_q95 = 0.0;
  long low_ess_streaks = 0;  // runs of >= 100 consecutive iterations with min ESS < 2
  double step_sigma2_final = 0.0;
  double step_rho_final = 0.0;
  double wall_ms = 0.0;

  double cov_accept_rate() const {
    return cov_attempts ? static_cast<double>(cov_accepts) / cov_attempts : 0.0;
  }
  double perm_accept_rate() const {
    return perm_attempts ? static_cast<double>(perm_accepts) / perm_attempts : 0.0;
  }
};

/// Normalizes log weights by max-shifted exponentiation; the result sums
/// to 1. Throws DegenerateWeightsError when every weight is zero.
Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& log_weights);

/// Kish effective sample size (sum w)^2 / sum w^2 of normalized weights.
double kish_ess(const Eigen::VectorXd& weights);

/// Wishart draw by Bartlett decomposition; dof must exceed dim - 1.
Eigen::MatrixXd draw_wishart(double dof, const Eigen::MatrixXd& scale, RngEngine& rng);

/// One DyIRMA Gibbs chain over (T, alpha, Sigma, Gamma, beta[, nu]).
/// Owns its RNG stream (config.seed + chain_index); the store and KDE are
/// shared read-only.
class GibbsChain {
 public:
  GibbsChain(const SamplerConfig& config, const RealizationStore& store,
             const GammaKernelKde& kde, int chain_index = 0);

  /// Full sweep loop; returns the thinned post-burn-in trace.
  ChainTrace run();

  // Block-level steps, in sweep order. Public so validation suites can
  // exercise each full conditional in isolation.
  Eigen::VectorXd compute_log_weights(int segment) const;
  int resample_segment(int segment, const Eigen::VectorXd& log_weights);
  void update_beta();
  void update_gamma();
  void update_alpha();
  void update_sigma_uns();
  bool update_cov_scalar();    // IND/CS/AR1/TRI random-walk MH; true when accepted
  bool update_permutation();   // swap proposal MH; true when accepted

  const HierParams& params() const { return params_; }
  HierParams& mutable_params() { return params_; }
  /// Re-materializes the covariance cache after direct params edits.
  void refresh_covariance();

  const std::vector<int>& selected() const { return selected_; }
  const Eigen::MatrixXd& current() const { return current_; }
  double last_min_ess() const { return last_min_ess_; }
  const ChainDiagnostics& diagnostics() const { return diag_; }
  /// Kish ESS per resample, iteration-major (n entries per iteration).
  const std::vector<double>& ess_history() const { return ess_history_; }
  RngEngine& rng() { return rng_; }

 private:
  double data_log_likelihood(const Eigen::MatrixXd& sigma_chol) const;
  double data_log_likelihood_params(const HierParams& p, const Eigen::MatrixXd& chol) const;
  Eigen::VectorXd draw_mvn_precision(const Eigen::MatrixXd& precision, const Eigen::VectorXd& b);
  void adapt_steps(long iteration);

  const SamplerConfig config_;
  const RealizationStore& store_;
  const GammaKernelKde& kde_;
  int chain_index_ = 0;
  int n_ = 0;
  int seasons_ = 0;
  int draws_ = 0;

  HierParams params_;
  std::vector<int> selected_;
  Eigen::MatrixXd current_;   // n x J selected values
  Eigen::MatrixXd kde_log_;   // n x M, fixed for the whole run
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd sigma_chol_;

  RngEngine rng_;
  double step_sigma2_ = 0.2;
  double step_rho_ = 0.2;
  long window_attempts_ = 0;
  long window_accepts_ = 0;

  double last_min_ess_ = 0.0;
  long low_ess_run_ = 0;
  bool low_ess_flagged_ = false;
  std::vector<double> ess_history_;
  ChainDiagnostics diag_;
  long current_iteration_ = 0;
};

/// Runs a single chain (chain index 0).
ChainTrace run_chain(const SamplerConfig& config, const RealizationStore& store,
                     const GammaKernelKde& kde);

/// Runs config.chains chains concurrently (at most `jobs` at a time, 0 =
/// all). Chain c uses seed config.seed + c. Traces come back in chain order.
/// ess_histories, when given, receives each chain's per-iteration ESS record.
std::vector<ChainTrace> run_chains(const SamplerConfig& config, const RealizationStore& store,
                                   const GammaKernelKde& kde, int jobs = 0,
                                   std::vector<ChainDiagnostics>* diagnostics = nullptr,
                                   std::vector<std::vector<double>>* ess_histories = nullptr);

}  // namespace dyirma
