#include "dyirma/sampler.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

namespace dyirma {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_inv_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_beta_pdf(double x, double a, double b) {
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

void Hyperpriors::validate(int segments) const {
  if (!(tau_beta > 0.0) || !(tau_alpha > 0.0)) throw ConfigError("precisions must be positive");
  if (!(p_inclusion > 0.0) || !(p_inclusion < 1.0))
    throw ConfigError("p_inclusion must lie in (0,1)");
  if (!(ig_shape > 0.0) || !(ig_scale > 0.0)) throw ConfigError("IG parameters must be positive");
  if (!(rho_a > 0.0) || !(rho_b > 0.0)) throw ConfigError("Beta parameters must be positive");
  const double nu = wishart_nu <= 0.0 ? segments + 1.0 : wishart_nu;
  if (nu < segments) throw ConfigError("wishart_nu must be at least the segment count");
  if (wishart_r.size() != 0 &&
      (wishart_r.rows() != segments || wishart_r.cols() != segments))
    throw ConfigError("wishart_r must be segments x segments");
}

long SamplerConfig::burn_iterations() const {
  const long post =
      static_cast<long>(std::floor(static_cast<double>(iterations) * (1.0 - burn_in_fraction) +
                                   1e-9));
  return iterations - post;
}

long SamplerConfig::retained_draws() const {
  return (iterations - burn_iterations()) / thinning;
}

void SamplerConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(burn_in_fraction >= 0.0) || !(burn_in_fraction < 1.0))
    throw ConfigError("burn_in_fraction must lie in [0,1)");
  if (thinning < 1) throw ConfigError("thinning must be >= 1");
  if (chains < 1) throw ConfigError("chains must be >= 1");
  if (retained_draws() < 1) throw ConfigError("no draws retained: iterations too small for "
                                              "burn-in and thinning");
  if (!(init_sigma2 > 0.0)) throw ConfigError("init_sigma2 must be positive");
  if (cov_kind_has_rho(cov_kind) && estimate_covariance) {
    if (!(init_rho > 0.0) || !(init_rho < 1.0))
      throw ConfigError("init_rho must lie in (0,1) when the correlation is sampled");
  }
  if (cov_kind_has_rho(cov_kind) && (!(init_rho >= 0.0) || !(init_rho < 1.0)))
    throw ConfigError("init_rho must lie in [0,1)");
  if (mh_step_sigma2 < 0.0 || mh_step_rho < 0.0) throw ConfigError("MH steps must be >= 0");
}

Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& log_weights) {
  if (log_weights.size() == 0) throw DegenerateWeightsError("no weights to normalize");
  const double max_w = log_weights.maxCoeff();
  if (!(max_w > kNegInf) || std::isnan(max_w))
    throw DegenerateWeightsError("all importance weights are zero");
  Eigen::VectorXd w = (log_weights.array() - max_w).exp();
  w /= w.sum();
  return w;
}

double kish_ess(const Eigen::VectorXd& weights) {
  const double s = weights.sum();
  const double s2 = weights.squaredNorm();
  return s * s / s2;
}

Eigen::MatrixXd draw_wishart(double dof, const Eigen::MatrixXd& scale, RngEngine& rng) {
  const long n = scale.rows();
  if (dof <= static_cast<double>(n) - 1.0)
    throw DomainError("wishart dof must exceed dim - 1");
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) throw NumericalError("wishart scale is not PD");
  const Eigen::MatrixXd l = llt.matrixL();

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (long i = 0; i < n; ++i) {
    std::gamma_distribution<double> chi2(0.5 * (dof - static_cast<double>(i)), 2.0);
    a(i, i) = std::sqrt(chi2(rng));
    for (long j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Eigen::MatrixXd la = l * a;
  return la * la.transpose();
}

GibbsChain::GibbsChain(const SamplerConfig& config, const RealizationStore& store,
                       const GammaKernelKde& kde, int chain_index)
    : config_(config), store_(store), kde_(kde), chain_index_(chain_index) {
  config_.validate();
  store_.validate();
  n_ = store_.segments();
  seasons_ = store_.seasons();
  draws_ = store_.samples();
  config_.hyper.validate(n_);
  if (kde_.dims() != seasons_)
    throw DomainError("KDE dimension " + std::to_string(kde_.dims()) +
                      " does not match season count " + std::to_string(seasons_));
  if (draws_ < 1) throw ValidationError("store has no draws");

  const std::uint64_t seed = config_.seed + static_cast<std::uint64_t>(chain_index);
  rng_.seed(seed);
  diag_.seed = seed;
  diag_.iterations = config_.iterations;

  params_.alpha.resize(n_);
  for (int i = 0; i < n_; ++i) params_.alpha(i) = store_.data[i].mean();
  params_.beta = Eigen::VectorXd::Zero(seasons_ - 1);
  params_.gamma.assign(seasons_ - 1, 0);
  params_.perm = identity_perm(n_);
  params_.cov.kind = config_.cov_kind;
  params_.cov.sigma2 = config_.init_sigma2;
  params_.cov.rho = config_.init_rho;
  if (config_.cov_kind == CovKind::UNS) {
    params_.cov.matrix = config_.init_cov_matrix.size()
                             ? config_.init_cov_matrix
                             : Eigen::MatrixXd::Identity(n_, n_);
  }
  refresh_covariance();

  selected_.assign(n_, 0);
  current_.resize(n_, seasons_);
  for (int i = 0; i < n_; ++i) current_.row(i) = store_.data[i].row(0);

  // The KDE term of the weights never changes across iterations.
  kde_log_.resize(n_, draws_);
  for (int i = 0; i < n_; ++i)
    for (int m = 0; m < draws_; ++m)
      kde_log_(i, m) = kde_.log_density(store_.data[i].row(m).transpose());

  step_sigma2_ = config_.mh_step_sigma2;
  step_rho_ = config_.mh_step_rho;
}

void GibbsChain::refresh_covariance() {
  sigma_ = materialize_covariance(params_.cov, params_.perm, n_);
  sigma_chol_ = Eigen::LLT<Eigen::MatrixXd>(sigma_).matrixL();
}

double GibbsChain::data_log_likelihood(const Eigen::MatrixXd& sigma_chol) const {
  return data_log_likelihood_params(params_, sigma_chol);
}

double GibbsChain::data_log_likelihood_params(const HierParams& p,
                                              const Eigen::MatrixXd& chol) const {
  if (config_.flat_likelihood) return 0.0;
  double ll = 0.0;
  for (int j = 0; j < seasons_; ++j)
    ll += mvn_log_density(current_.col(j), season_mean(j, p), chol);
  return ll;
}

Eigen::VectorXd GibbsChain::compute_log_weights(int segment) const {
  if (segment < 0 || segment >= n_) throw DomainError("segment index out of range");
  Eigen::VectorXd logw(draws_);
  if (config_.flat_likelihood) {
    logw = -kde_log_.row(segment).transpose();
    return logw;
  }
  const SegmentConditional cond = make_segment_conditional(segment, current_, params_, sigma_);
  for (int m = 0; m < draws_; ++m) {
    logw(m) =
        cond.log_density(store_.data[segment].row(m).transpose()) - kde_log_(segment, m);
  }
  return logw;
}

int GibbsChain::resample_segment(int segment, const Eigen::VectorXd& log_weights) {
  Eigen::VectorXd w;
  try {
    w = normalize_log_weights(log_weights);
  } catch (const DegenerateWeightsError&) {
    throw DegenerateWeightsError("degenerate importance weights for segment " +
                                 store_.segment_labels[segment]);
  }
  ess_history_.push_back(kish_ess(w));

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng_);
  double acc = 0.0;
  int idx = draws_ - 1;
  for (int m = 0; m < draws_; ++m) {
    acc += w(m);
    if (u <= acc) {
      idx = m;
      break;
    }
  }
  selected_[segment] = idx;
  current_.row(segment) = store_.data[segment].row(idx);
  return idx;
}

void GibbsChain::update_beta() {
  const int jm1 = seasons_ - 1;
  if (jm1 == 0) return;
  const auto& h = config_.hyper;
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<int> active;
  if (!config_.flat_likelihood) {
    for (int k = 0; k < jm1; ++k)
      if (params_.gamma[k]) active.push_back(k);
  }
  const int na = static_cast<int>(active.size());
  Eigen::VectorXd next = params_.beta;

  if (na > 0) {
    Eigen::MatrixXd precision = h.tau_beta * Eigen::MatrixXd::Identity(na, na);
    Eigen::VectorXd b = Eigen::VectorXd::Constant(na, h.tau_beta * h.mu_beta);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n_);
    const Eigen::VectorXd u = sigma_chol_.triangularView<Eigen::Lower>()
                                  .transpose()
                                  .solve(sigma_chol_.triangularView<Eigen::Lower>().solve(ones));
    const double s = ones.dot(u);
    for (int j = 0; j < seasons_; ++j) {
      const Eigen::VectorXd r = current_.col(j) - params_.alpha;
      const double d = u.dot(r);
      for (int a = 0; a < na; ++a) {
        if (active[a] >= j) continue;
        b(a) += d;
        for (int b2 = 0; b2 < na; ++b2)
          if (active[b2] < j) precision(a, b2) += s;
      }
    }
    const Eigen::VectorXd draw = draw_mvn_precision(precision, b);
    for (int a = 0; a < na; ++a) next(active[a]) = draw(a);
  }

  // Kuo-Mallick: inactive coordinates refresh from the prior.
  const double prior_sd = 1.0 / std::sqrt(h.tau_beta);
  std::vector<char> is_active(jm1, 0);
  for (int k : active) is_active[k] = 1;
  for (int k = 0; k < jm1; ++k)
    if (!is_active[k]) next(k) = h.mu_beta + prior_sd * normal(rng_);

  params_.beta = next;
}

void GibbsChain::update_gamma() {
  const int jm1 = seasons_ - 1;
  const double p0 = config_.hyper.p_inclusion;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int j = 0; j < jm1; ++j) {
    double p1;
    if (config_.flat_likelihood) {
      p1 = p0;
    } else {
      const int saved = params_.gamma[j];
      params_.gamma[j] = 1;
      const double ll1 = data_log_likelihood(sigma_chol_);
      params_.gamma[j] = 0;
      const double ll0 = data_log_likelihood(sigma_chol_);
      params_.gamma[j] = saved;
      const double log_odds = logit(p0) + ll1 - ll0;
      p1 = 1.0 / (1.0 + std::exp(-log_odds));
    }
    params_.gamma[j] = unif(rng_) < p1 ? 1 : 0;
  }
}

void GibbsChain::update_alpha() {
  const auto& h = config_.hyper;
  Eigen::MatrixXd precision =
      h.tau_alpha * Eigen::MatrixXd::Identity(n_, n_);
  Eigen::VectorXd b = Eigen::VectorXd::Constant(n_, h.tau_alpha * h.mu_alpha);
  if (!config_.flat_likelihood) {
    const Eigen::MatrixXd sigma_inv = Eigen::LLT<Eigen::MatrixXd>(sigma_).solve(
        Eigen::MatrixXd::Identity(n_, n_));
    precision += static_cast<double>(seasons_) * sigma_inv;
    Eigen::VectorXd resid_sum = Eigen::VectorXd::Zero(n_);
    for (int j = 0; j < seasons_; ++j)
      resid_sum += current_.col(j) - Eigen::VectorXd::Constant(n_, season_offset(j, params_));
    b += sigma_inv * resid_sum;
  }
  params_.alpha = draw_mvn_precision(precision, b);
}

void GibbsChain::update_sigma_uns() {
  if (params_.cov.kind != CovKind::UNS) throw DomainError("update_sigma_uns needs UNS kind");
  const auto& h = config_.hyper;
  const double nu = h.wishart_nu <= 0.0 ? n_ + 1.0 : h.wishart_nu;
  const Eigen::MatrixXd r =
      h.wishart_r.size() ? h.wishart_r : Eigen::MatrixXd::Identity(n_, n_);

  Eigen::MatrixXd scale_inv = r;
  double dof = nu;
  if (!config_.flat_likelihood) {
    for (int j = 0; j < seasons_; ++j) {
      const Eigen::VectorXd resid = current_.col(j) - season_mean(j, params_);
      scale_inv += resid * resid.transpose();
    }
    dof += static_cast<double>(seasons_);
  }
  const Eigen::MatrixXd scale = Eigen::LLT<Eigen::MatrixXd>(scale_inv).solve(
      Eigen::MatrixXd::Identity(n_, n_));
  const Eigen::MatrixXd w = draw_wishart(dof, scale, rng_);
  Eigen::LLT<Eigen::MatrixXd> llt(w);
  if (llt.info() != Eigen::Success) throw NumericalError("wishart draw not PD");
  params_.cov.matrix = llt.solve(Eigen::MatrixXd::Identity(n_, n_));
  refresh_covariance();
}

bool GibbsChain::update_cov_scalar() {
  const CovKind kind = params_.cov.kind;
  if (kind == CovKind::UNS) throw DomainError("scalar covariance update not valid for UNS");
  const auto& h = config_.hyper;
  const bool with_rho = cov_kind_has_rho(kind);
  ++diag_.cov_attempts;
  ++window_attempts_;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const double cur_s2 = params_.cov.sigma2;
  const double cur_rho = params_.cov.rho;
  const double s2_star = std::exp(std::log(cur_s2) + step_sigma2_ * normal(rng_));
  double rho_star = cur_rho;
  if (with_rho) {
    const double l_star = logit(cur_rho) + step_rho_ * normal(rng_);
    rho_star = 1.0 / (1.0 + std::exp(-l_star));
  }

  CovarianceSpec prop = params_.cov;
  prop.sigma2 = s2_star;
  prop.rho = rho_star;
  Eigen::MatrixXd sigma_star;
  try {
    sigma_star = materialize_covariance(prop, params_.perm, n_);
  } catch (const PdViolationError&) {
    return false;  // rejected outright
  }
  const Eigen::MatrixXd chol_star = Eigen::LLT<Eigen::MatrixXd>(sigma_star).matrixL();

  // Prior times Jacobian of the (log sigma2, logit rho) transform.
  double lp_star = log_inv_gamma_pdf(s2_star, h.ig_shape, h.ig_scale) + std::log(s2_star);
  double lp_cur = log_inv_gamma_pdf(cur_s2, h.ig_shape, h.ig_scale) + std::log(cur_s2);
  if (with_rho) {
    lp_star += log_beta_pdf(rho_star, h.rho_a, h.rho_b) +
               std::log(rho_star) + std::log1p(-rho_star);
    lp_cur += log_beta_pdf(cur_rho, h.rho_a, h.rho_b) +
              std::log(cur_rho) + std::log1p(-cur_rho);
  }
  const double log_ratio = data_log_likelihood(chol_star) + lp_star -
                           data_log_likelihood(sigma_chol_) - lp_cur;
  if (std::log(unif(rng_)) < log_ratio) {
    params_.cov = prop;
    sigma_ = sigma_star;
    sigma_chol_ = chol_star;
    ++diag_.cov_accepts;
    ++window_accepts_;
    return true;
  }
  return false;
}

bool GibbsChain::update_permutation() {
  if (!cov_kind_permutable(params_.cov.kind))
    throw DomainError("permutation sampling needs AR1 or TRI covariance");
  ++diag_.perm_attempts;
  std::uniform_int_distribution<int> pick_a(0, n_ - 1);
  std::uniform_int_distribution<int> pick_b(0, n_ - 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int a = pick_a(rng_);
  int b = pick_b(rng_);
  if (b >= a) ++b;

  std::vector<int> perm_star = params_.perm;
  std::swap(perm_star[a], perm_star[b]);
  const Eigen::MatrixXd sigma_star = materialize_covariance(params_.cov, perm_star, n_);
  const Eigen::MatrixXd chol_star = Eigen::LLT<Eigen::MatrixXd>(sigma_star).matrixL();

  // Flat permutation prior and an involutive proposal: the ratio is purely
  // the likelihood ratio.
  const double log_ratio =
      data_log_likelihood(chol_star) - data_log_likelihood(sigma_chol_);
  if (std::log(unif(rng_)) < log_ratio) {
    params_.perm = std::move(perm_star);
    sigma_ = sigma_star;
    sigma_chol_ = chol_star;
    ++diag_.perm_accepts;
    return true;
  }
  return false;
}

Eigen::VectorXd GibbsChain::draw_mvn_precision(const Eigen::MatrixXd& precision,
                                               const Eigen::VectorXd& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("singular full-conditional precision");
  const Eigen::VectorXd mean = llt.solve(b);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(precision.rows());
  for (long i = 0; i < z.size(); ++i) z(i) = normal(rng_);
  return mean + llt.matrixU().solve(z);
}

void GibbsChain::adapt_steps(long iteration) {
  if (iteration % 50 != 0 || window_attempts_ == 0) return;
  const double rate = static_cast<double>(window_accepts_) / window_attempts_;
  double factor = 1.0;
  if (rate < 0.30) factor = 0.8;
  else if (rate > 0.45) factor = 1.25;
  step_sigma2_ = std::clamp(step_sigma2_ * factor, 1e-4, 10.0);
  step_rho_ = std::clamp(step_rho_ * factor, 1e-4, 10.0);
  window_attempts_ = 0;
  window_accepts_ = 0;
}

ChainTrace GibbsChain::run() {
  const auto t_start = std::chrono::steady_clock::now();
  const long burn = config_.burn_iterations();
  const long thin = config_.thinning;

  ChainTrace trace;
  trace.chain_id = chain_index_;
  trace.cov_kind = params_.cov.kind;
  trace.segments = n_;
  trace.seasons = seasons_;

  ess_history_.clear();
  ess_history_.reserve(static_cast<size_t>(config_.iterations) * n_);

  for (long t = 1; t <= config_.iterations; ++t) {
    current_iteration_ = t;
    double min_ess = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_; ++i) {
      Eigen::VectorXd logw;
      try {
        logw = compute_log_weights(i);
        resample_segment(i, logw);
      } catch (const DegenerateWeightsError& e) {
        throw DegenerateWeightsError(std::string(e.what()) + " at iteration " +
                                     std::to_string(t));
      }
      min_ess = std::min(min_ess, ess_history_.back());
    }
    last_min_ess_ = min_ess;
    if (min_ess < 2.0) {
      ++low_ess_run_;
      if (low_ess_run_ >= 100 && !low_ess_flagged_) {
        ++diag_.low_ess_streaks;
        low_ess_flagged_ = true;
      }
    } else {
      low_ess_run_ = 0;
      low_ess_flagged_ = false;
    }

    update_beta();
    update_gamma();
    update_alpha();
    if (config_.estimate_covariance) {
      if (params_.cov.kind == CovKind::UNS) update_sigma_uns();
      else update_cov_scalar();
    }
    if (config_.permute && cov_kind_permutable(params_.cov.kind)) update_permutation();

    if (t <= burn) adapt_steps(t);

    if (t > burn && (t - burn) % thin == 0) {
      trace.iterations.push_back(t);
      trace.alpha.push_back(params_.alpha);
      trace.beta.push_back(params_.beta);
      trace.gamma.push_back(params_.gamma);
      if (params_.cov.kind == CovKind::UNS) {
        trace.cov_matrix.push_back(params_.cov.matrix);
      } else {
        trace.sigma2.push_back(params_.cov.sigma2);
        if (cov_kind_has_rho(params_.cov.kind)) trace.rho.push_back(params_.cov.rho);
      }
      trace.perm.push_back(params_.perm);
      trace.selected.push_back(selected_);
    }
  }

  std::vector<double> sorted = ess_history_;
  std::sort(sorted.begin(), sorted.end());
  diag_.ess_q05 = quantile_sorted(sorted, 0.05);
  diag_.ess_q50 = quantile_sorted(sorted, 0.50);
  diag_.ess_q95 = quantile_sorted(sorted, 0.95);
  diag_.step_sigma2_final = step_sigma2_;
  diag_.step_rho_final = step_rho_;
  diag_.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
  return trace;
}

ChainTrace run_chain(const SamplerConfig& config, const RealizationStore& store,
                     const GammaKernelKde& kde) {
  GibbsChain chain(config, store, kde, 0);
  return chain.run();
}

std::vector<ChainTrace> run_chains(const SamplerConfig& config, const RealizationStore& store,
                                   const GammaKernelKde& kde, int jobs,
                                   std::vector<ChainDiagnostics>* diagnostics,
                                   std::vector<std::vector<double>>* ess_histories) {
  config.validate();
  const int chains = config.chains;
  std::vector<ChainTrace> traces(chains);
  std::vector<ChainDiagnostics> diags(chains);
  std::vector<std::vector<double>> histories(chains);
  std::vector<std::exception_ptr> errors(chains);

  const int batch = jobs <= 0 ? chains : std::min(jobs, chains);
  for (int start = 0; start < chains; start += batch) {
    const int stop = std::min(start + batch, chains);
    std::vector<std::thread> workers;
    workers.reserve(stop - start);
    for (int c = start; c < stop; ++c) {
      workers.emplace_back([&, c]() {
        try {
          GibbsChain chain(config, store, kde, c);
          traces[c] = chain.run();
          diags[c] = chain.diagnostics();
          if (ess_histories) histories[c] = chain.ess_history();
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
    for (auto& w : workers) w.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (diagnostics) *diagnostics = std::move(diags);
  if (ess_histories) *ess_histories = std::move(histories);
  return traces;
}

}  // namespace dyirma
