#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dyirma/realization_io.hpp"
#include "dyirma/trace.hpp"

namespace dyirma {

/// Geweke convergence z-score comparing the first frac_a and last frac_b
/// segments of a series. Variance of each segment mean is estimated by
/// non-overlapping batch means with sqrt(length) batches.
double geweke_z(const std::vector<double>& series, double frac_a = 0.1, double frac_b = 0.5);

/// Gelman-Rubin potential scale reduction over >= 2 equal-length chains:
/// sqrt((R-1)/R + var(chain means)/W). `split` halves every chain first.
double rhat(const std::vector<std::vector<double>>& chains, bool split = false);

/// Equal-tailed quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double q);

/// Credible interval convention for the summary tables.
enum class IntervalKind { EqualTailed, HighestDensity };

/// Shortest interval containing `mass` of the draws (HDI).
std::pair<double, double> hdi_interval(std::vector<double> values, double mass = 0.95);

struct BetaSummary {
  double inclusion_prob = 0.0;
  std::optional<double> cond_mean;                    // absent when gamma_j never 1
  std::optional<std::pair<double, double>> cond_bci;  // 2.5% / 97.5%
};

/// Inclusion probability and conditional (on gamma_j = 1) mean/interval of a
/// season-jump effect. jump is 0-based: the jump into season jump+1.
BetaSummary conditional_mean_beta(const std::vector<ChainTrace>& traces, int jump,
                                  IntervalKind kind = IntervalKind::EqualTailed);

/// Mean over retained iterations of mean(alpha) + sum_{k < season} gamma_k
/// beta_k: the absolute time-course value for a season (0-based).
double absolute_timecourse(const std::vector<ChainTrace>& traces, int season);

enum class PatternRestrict { Exact, AtLeast };

/// Fraction of retained iterations whose gamma matches the pattern of
/// required-on jumps (Exact: all others off; AtLeast: others free).
double model_posterior_prob(const std::vector<ChainTrace>& traces,
                            const std::vector<int>& on_jumps, PatternRestrict restrict);

struct NeighborProb {
  double conditional = 0.0;       // P(|pos_i - pos_i'| = 1 | rho > threshold)
  double rho_exceed_prob = 0.0;   // P(rho > threshold)
};

NeighborProb neighbor_probability(const std::vector<ChainTrace>& traces, int seg_a, int seg_b,
                                  double rho_threshold = 0.2);

/// BF = posterior odds / prior odds. Both must be positive.
double bayes_factor(double posterior_odds, double prior_odds);

struct ShrinkageRow {
  int segment = 0;
  int season = 0;
  double strat_mean = 0, strat_lo = 0, strat_hi = 0;
  double hier_mean = 0, hier_lo = 0, hier_hi = 0;
  double grand_mean = 0;  // per-season stratified grand mean
};

/// Stratified (raw store column) vs hierarchical (resampled draws pointed at
/// by the trace's selected indices) summaries per (segment, season).
std::vector<ShrinkageRow> shrinkage_table(const std::vector<ChainTrace>& traces,
                                          const RealizationStore& store,
                                          IntervalKind kind = IntervalKind::EqualTailed);

// Pooled per-parameter scalar series extraction used by diagnostics and the
// report writers.
std::vector<std::string> trace_parameter_names(const ChainTrace& trace);
std::vector<double> trace_parameter_series(const ChainTrace& trace, const std::string& name);

}  // namespace dyirma
