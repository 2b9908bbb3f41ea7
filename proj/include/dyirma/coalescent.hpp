#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "dyirma/errors.hpp"
#include "dyirma/realization_io.hpp"

namespace dyirma {

using RngEngine = std::mt19937_64;

/// Taxa with sampling times (years before present, 0 = most recent) and the
/// season each taxon belongs to (0-based, every season 0..J-1 non-empty).
struct SamplingSchedule {
  std::vector<double> sample_times;
  std::vector<int> season_of_taxon;

  int taxa() const { return static_cast<int>(sample_times.size()); }
  int seasons() const;
  int distinct_sample_times() const;
  void validate() const;

  /// Convenience builder: `count[j]` taxa for season j, season j sampled at
  /// time j * spacing (season 0 most recent).
  static SamplingSchedule regular(const std::vector<int>& count_per_season, double spacing);
};

/// Piecewise-constant effective population size: phi[b] applies on
/// [change_times[b-1], change_times[b]), with the first group starting at 0
/// and the last extending to infinity.
struct PopTrajectory {
  std::vector<double> change_times;  // B-1, strictly increasing
  std::vector<double> phi;           // B, all positive

  int groups() const { return static_cast<int>(phi.size()); }
  int group_of(double t) const;
  double phi_at(double t) const { return phi[group_of(t)]; }
  void validate() const;

  static PopTrajectory constant(double value);
};

enum class CoalEventKind { Coalescent, Sampling };

/// Event-time representation of a heterochronous genealogy plus the tree
/// topology needed for subset TMRCA extraction. Nodes 0..n-1 are tips in
/// schedule order, nodes n..2n-2 internal in coalescence order.
struct Genealogy {
  std::vector<double> event_times;          // kappa+1, nondecreasing, t_0 first
  std::vector<CoalEventKind> event_kinds;   // kappa, kind of the event at t_e
  std::vector<int> lineage_counts;          // kappa, lineages during interval e
  std::vector<double> intervals;            // kappa, t_e - t_{e-1}
  std::vector<int> taxon_seasons;

  int n_taxa = 0;
  std::vector<double> node_times;           // 2n-1
  std::vector<int> parent;                  // -1 at the root
  std::vector<std::array<int, 2>> children; // internal nodes only, index - n_taxa

  int events() const { return static_cast<int>(event_kinds.size()); }
  int root() const { return 2 * n_taxa - 2; }
  void validate() const;
};

/// Simulates a genealogy backward in time. The coalescence rate with k
/// lineages is k(k-1)/(2 phi); the exponential clock restarts at every
/// sampling event and trajectory change point, which is exact by
/// memorylessness.
Genealogy simulate_genealogy(const SamplingSchedule& schedule, const PopTrajectory& traj,
                             RngEngine& rng);
Genealogy simulate_genealogy(const SamplingSchedule& schedule, const PopTrajectory& traj,
                             std::uint64_t seed);

/// Heterochronous coalescent log density of a genealogy under a trajectory:
/// sum over intervals of 1_coa(e) log(k_e(k_e-1)/(2 phi)) - k_e(k_e-1)
/// gamma_e/(2 phi), with phi taken from the group containing t_e.
double log_coalescent_density(const Genealogy& g, const PopTrajectory& traj);

/// TMRCA of the tips in a season: MRCA time minus the season's most recent
/// sampling time. A singleton season returns 0.
double tmrca_of_subset(const Genealogy& g, int season);

/// Hyperprior over trajectories: phi_1 log-uniform on [phi_min, phi_max],
/// each later group Exponential with mean equal to the previous group,
/// truncated at phi_max. groups == 1 keeps the population constant.
struct PhiHyperprior {
  double phi_min = 1e-3;
  double phi_max = 120000.0;
  int groups = 1;

  void validate() const;
};

/// Draws trajectories from the hyperprior, simulates genealogies, and
/// collects the per-season TMRCAs into PriorSamples (draws x seasons).
/// With groups > 1 the change points are placed at evenly spaced quantiles
/// of a pilot genealogy's event times, pilot simulated at phi_1.
PriorSamples sample_prior_tmrca(const SamplingSchedule& schedule, const PhiHyperprior& hyper,
                                int draws, std::uint64_t seed);

}  // namespace dyirma
