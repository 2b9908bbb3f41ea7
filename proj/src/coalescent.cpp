#include "dyirma/coalescent.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

namespace dyirma {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double coalescence_rate(int k, double phi) {
  return static_cast<double>(k) * (k - 1) / (2.0 * phi);
}

// Exponential with the given mean, truncated to [0, cap], by inverse CDF.
double truncated_exp(double mean, double cap, RngEngine& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  const double tail = -std::expm1(-cap / mean);  // 1 - exp(-cap/mean)
  return -mean * std::log1p(-u * tail);
}

}  // namespace

int SamplingSchedule::seasons() const {
  int max_season = -1;
  for (int s : season_of_taxon) max_season = std::max(max_season, s);
  return max_season + 1;
}

int SamplingSchedule::distinct_sample_times() const {
  std::vector<double> times = sample_times;
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return static_cast<int>(times.size());
}

void SamplingSchedule::validate() const {
  if (taxa() < 2) throw DomainError("schedule needs at least 2 taxa");
  if (season_of_taxon.size() != sample_times.size())
    throw DomainError("schedule season list length mismatch");
  bool any_at_zero = false;
  for (double t : sample_times) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("sample times must be finite and >= 0");
    if (t == 0.0) any_at_zero = true;
  }
  if (!any_at_zero) throw DomainError("at least one taxon must be sampled at time 0");
  const int j = seasons();
  std::vector<int> count(j, 0);
  for (int s : season_of_taxon) {
    if (s < 0) throw DomainError("negative season index");
    ++count[s];
  }
  for (int k = 0; k < j; ++k)
    if (count[k] == 0) throw DomainError("season " + std::to_string(k) + " has no taxa");
}

SamplingSchedule SamplingSchedule::regular(const std::vector<int>& count_per_season,
                                           double spacing) {
  SamplingSchedule s;
  for (size_t j = 0; j < count_per_season.size(); ++j) {
    for (int k = 0; k < count_per_season[j]; ++k) {
      s.sample_times.push_back(spacing * static_cast<double>(j));
      s.season_of_taxon.push_back(static_cast<int>(j));
    }
  }
  s.validate();
  return s;
}

int PopTrajectory::group_of(double t) const {
  if (t < 0.0) throw DomainError("time before present support");
  const auto it = std::upper_bound(change_times.begin(), change_times.end(), t);
  return static_cast<int>(it - change_times.begin());
}

void PopTrajectory::validate() const {
  if (phi.empty()) throw DomainError("trajectory needs at least one group");
  if (change_times.size() + 1 != phi.size())
    throw DomainError("trajectory needs exactly B-1 change times");
  for (double p : phi)
    if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("phi values must be positive");
  for (size_t i = 1; i < change_times.size(); ++i)
    if (!(change_times[i] > change_times[i - 1]))
      throw DomainError("change times must be strictly increasing");
  if (!change_times.empty() && change_times.front() < 0.0)
    throw DomainError("change times must be nonnegative");
}

PopTrajectory PopTrajectory::constant(double value) {
  PopTrajectory t;
  t.phi = {value};
  t.validate();
  return t;
}

void Genealogy::validate() const {
  const int kappa = events();
  if (static_cast<int>(event_times.size()) != kappa + 1 ||
      static_cast<int>(lineage_counts.size()) != kappa ||
      static_cast<int>(intervals.size()) != kappa)
    throw DomainError("genealogy event arrays inconsistent");
  int coal = 0;
  for (auto k : event_kinds)
    if (k == CoalEventKind::Coalescent) ++coal;
  if (coal != n_taxa - 1) throw DomainError("genealogy must contain n-1 coalescent events");
  for (int e = 0; e < kappa; ++e) {
    if (intervals[e] < 0.0) throw DomainError("negative interval");
    const double d = event_times[e + 1] - event_times[e];
    if (std::abs(d - intervals[e]) > 1e-9 * std::max(1.0, std::abs(event_times[e + 1])))
      throw DomainError("intervals do not match event times");
  }
}

Genealogy simulate_genealogy(const SamplingSchedule& schedule, const PopTrajectory& traj,
                             RngEngine& rng) {
  schedule.validate();
  traj.validate();
  const int n = schedule.taxa();

  // Distinct sampling events, most recent first.
  std::map<double, std::vector<int>> by_time;
  for (int i = 0; i < n; ++i) by_time[schedule.sample_times[i]].push_back(i);

  Genealogy g;
  g.n_taxa = n;
  g.taxon_seasons = schedule.season_of_taxon;
  g.node_times.assign(2 * n - 1, 0.0);
  g.parent.assign(2 * n - 1, -1);
  for (int i = 0; i < n; ++i) g.node_times[i] = schedule.sample_times[i];

  auto sample_it = by_time.begin();
  std::vector<int> active;
  double cur_t = sample_it->first;  // == 0 by schedule contract
  double last_event_t = cur_t;      // cur_t may advance past change points
  g.event_times.push_back(cur_t);
  for (int tip : sample_it->second) active.push_back(tip);
  ++sample_it;

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int next_internal = n;

  auto record = [&](double t, CoalEventKind kind, int k_during) {
    g.event_times.push_back(t);
    g.event_kinds.push_back(kind);
    g.lineage_counts.push_back(k_during);
    g.intervals.push_back(t - last_event_t);
    last_event_t = t;
  };

  while (active.size() > 1 || sample_it != by_time.end()) {
    const int k = static_cast<int>(active.size());
    double coal_t = kInf;
    if (k >= 2) {
      const double rate = coalescence_rate(k, traj.phi_at(cur_t));
      const double u = unif(rng);
      coal_t = cur_t - std::log1p(-u) / rate;
    }
    const double next_sample = sample_it != by_time.end() ? sample_it->first : kInf;
    // Next trajectory change point strictly after cur_t, if any.
    double next_change = kInf;
    {
      const auto it = std::upper_bound(traj.change_times.begin(), traj.change_times.end(), cur_t);
      if (it != traj.change_times.end()) next_change = *it;
    }

    if (coal_t < next_sample && coal_t < next_change) {
      // Coalescent event: merge two uniformly chosen active lineages.
      std::uniform_int_distribution<int> pick_a(0, k - 1);
      std::uniform_int_distribution<int> pick_b(0, k - 2);
      int a = pick_a(rng);
      int b = pick_b(rng);
      if (b >= a) ++b;
      const int node = next_internal++;
      g.node_times[node] = coal_t;
      g.parent[active[a]] = node;
      g.parent[active[b]] = node;
      g.children.push_back({active[a], active[b]});
      if (a > b) std::swap(a, b);
      active[a] = node;
      active.erase(active.begin() + b);
      record(coal_t, CoalEventKind::Coalescent, k);
      cur_t = coal_t;
    } else if (next_sample <= next_change) {
      record(next_sample, CoalEventKind::Sampling, k);
      for (int tip : sample_it->second) active.push_back(tip);
      cur_t = next_sample;
      ++sample_it;
    } else {
      // Rate boundary: restart the clock, no event recorded.
      cur_t = next_change;
    }
  }

  g.validate();
  return g;
}

Genealogy simulate_genealogy(const SamplingSchedule& schedule, const PopTrajectory& traj,
                             std::uint64_t seed) {
  RngEngine rng(seed);
  return simulate_genealogy(schedule, traj, rng);
}

double log_coalescent_density(const Genealogy& g, const PopTrajectory& traj) {
  traj.validate();
  double total = 0.0;
  for (int e = 0; e < g.events(); ++e) {
    const double t_e = g.event_times[e + 1];
    if (t_e < 0.0) throw DomainError("event time outside trajectory support");
    const double phi = traj.phi[traj.group_of(t_e)];
    const int k = g.lineage_counts[e];
    const double rate = coalescence_rate(k, phi);
    if (g.event_kinds[e] == CoalEventKind::Coalescent) total += std::log(rate);
    total -= rate * g.intervals[e];
  }
  return total;
}

double tmrca_of_subset(const Genealogy& g, int season) {
  std::vector<int> tips;
  for (int i = 0; i < g.n_taxa; ++i)
    if (g.taxon_seasons[i] == season) tips.push_back(i);
  if (tips.empty()) throw DomainError("season " + std::to_string(season) + " has no tips");
  if (tips.size() == 1) return 0.0;

  // Count subset tips below each node, then walk up from one tip to the
  // first node covering the whole subset.
  std::vector<int> below(2 * g.n_taxa - 1, 0);
  for (int tip : tips) below[tip] = 1;
  for (size_t c = 0; c < g.children.size(); ++c) {
    const int node = g.n_taxa + static_cast<int>(c);
    below[node] = below[g.children[c][0]] + below[g.children[c][1]];
  }
  int node = tips.front();
  while (below[node] < static_cast<int>(tips.size())) node = g.parent[node];

  double first_time = kInf;
  for (int tip : tips) first_time = std::min(first_time, g.node_times[tip]);
  return g.node_times[node] - first_time;
}

void PhiHyperprior::validate() const {
  if (!(phi_min > 0.0) || !std::isfinite(phi_min)) throw ConfigError("phi_min must be positive");
  if (!(phi_max >= phi_min)) throw ConfigError("phi_max must be >= phi_min");
  if (!std::isfinite(phi_max)) throw ConfigError("phi_1 prior must be bounded (finite phi_max)");
  if (groups < 1) throw ConfigError("trajectory needs at least one group");
}

PriorSamples sample_prior_tmrca(const SamplingSchedule& schedule, const PhiHyperprior& hyper,
                                int draws, std::uint64_t seed) {
  schedule.validate();
  hyper.validate();
  if (draws < 2) throw DomainError("at least 2 prior draws required");

  const int seasons = schedule.seasons();
  RngEngine rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  PriorSamples prior;
  prior.data.resize(draws, seasons);
  prior.season_labels.resize(seasons);
  for (int j = 0; j < seasons; ++j) prior.season_labels[j] = "season_" + std::to_string(j + 1);

  for (int d = 0; d < draws; ++d) {
    const double log_lo = std::log(hyper.phi_min);
    const double log_hi = std::log(hyper.phi_max);
    const double phi1 = hyper.phi_min == hyper.phi_max
                            ? hyper.phi_min
                            : std::exp(log_lo + (log_hi - log_lo) * unif(rng));

    PopTrajectory traj;
    if (hyper.groups == 1) {
      traj = PopTrajectory::constant(phi1);
    } else {
      // Pilot pass at constant phi1 supplies the event-time quantiles used
      // as change points for this draw.
      Genealogy pilot = simulate_genealogy(schedule, PopTrajectory::constant(phi1), rng);
      std::vector<double> times(pilot.event_times.begin() + 1, pilot.event_times.end());
      std::sort(times.begin(), times.end());
      traj.phi.push_back(phi1);
      for (int b = 1; b < hyper.groups; ++b) {
        const double q = static_cast<double>(b) / hyper.groups;
        double ct = times[static_cast<size_t>(q * (times.size() - 1))];
        if (!traj.change_times.empty() && ct <= traj.change_times.back())
          ct = traj.change_times.back() + 1e-9;
        traj.change_times.push_back(ct);
        traj.phi.push_back(truncated_exp(traj.phi[b - 1], hyper.phi_max, rng));
      }
      traj.validate();
    }

    const Genealogy g = simulate_genealogy(schedule, traj, rng);
    for (int j = 0; j < seasons; ++j) prior.data(d, j) = tmrca_of_subset(g, j);
  }
  return prior;
}

}  // namespace dyirma
