#include "dyirma/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dyirma {

namespace {

double mean_of(const std::vector<double>& v, size_t begin, size_t count) {
  double acc = 0.0;
  for (size_t i = begin; i < begin + count; ++i) acc += v[i];
  return acc / static_cast<double>(count);
}

// Batch-means estimate of Var(segment mean).
double batch_means_var(const std::vector<double>& v, size_t begin, size_t count) {
  const size_t nb = std::max<size_t>(2, static_cast<size_t>(std::sqrt(count)));
  const size_t bs = count / nb;
  const size_t used = nb * bs;
  std::vector<double> means(nb);
  for (size_t b = 0; b < nb; ++b) means[b] = mean_of(v, begin + b * bs, bs);
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / nb;
  double ss = 0.0;
  for (double m : means) ss += (m - grand) * (m - grand);
  const double var_means = ss / static_cast<double>(nb - 1);
  (void)used;
  return var_means / static_cast<double>(nb);
}

double sample_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

bool all_equal(const std::vector<double>& v, size_t begin, size_t count) {
  for (size_t i = begin + 1; i < begin + count; ++i)
    if (v[i] != v[begin]) return false;
  return true;
}

void check_traces(const std::vector<ChainTrace>& traces) {
  if (traces.empty()) throw DomainError("no traces given");
  for (const auto& t : traces) {
    if (t.empty()) throw DomainError("empty trace");
    t.validate();
  }
}

}  // namespace

double geweke_z(const std::vector<double>& series, double frac_a, double frac_b) {
  const size_t n = series.size();
  if (n < 100) throw DomainError("geweke needs a series of length >= 100");
  if (!(frac_a > 0.0) || !(frac_b > 0.0) || frac_a + frac_b > 1.0)
    throw DomainError("geweke fractions invalid");
  const size_t na = static_cast<size_t>(frac_a * n);
  const size_t nb = static_cast<size_t>(frac_b * n);
  const size_t begin_b = n - nb;

  if (all_equal(series, 0, na) && all_equal(series, begin_b, nb) &&
      series[0] == series[begin_b])
    return 0.0;

  const double mean_a = mean_of(series, 0, na);
  const double mean_b = mean_of(series, begin_b, nb);
  const double var_a = batch_means_var(series, 0, na);
  const double var_b = batch_means_var(series, begin_b, nb);
  const double denom = std::sqrt(var_a + var_b);
  if (denom == 0.0) return mean_a == mean_b ? 0.0 : std::numeric_limits<double>::infinity();
  return (mean_a - mean_b) / denom;
}

double rhat(const std::vector<std::vector<double>>& chains, bool split) {
  if (split) {
    std::vector<std::vector<double>> halves;
    for (const auto& c : chains) {
      const size_t half = c.size() / 2;
      if (half < 5) throw DomainError("chains too short to split");
      halves.emplace_back(c.begin(), c.begin() + half);
      halves.emplace_back(c.begin() + half, c.begin() + 2 * half);
    }
    return rhat(halves, false);
  }
  if (chains.size() < 2) throw DomainError("rhat needs at least 2 chains");
  const size_t r = chains[0].size();
  if (r < 10) throw DomainError("rhat needs chains of length >= 10");
  for (const auto& c : chains)
    if (c.size() != r) throw DomainError("rhat needs equal-length chains");

  std::vector<double> means(chains.size());
  double w = 0.0;
  for (size_t c = 0; c < chains.size(); ++c) {
    means[c] = std::accumulate(chains[c].begin(), chains[c].end(), 0.0) / r;
    w += sample_variance(chains[c]);
  }
  w /= static_cast<double>(chains.size());
  const double var_means = sample_variance(means);
  if (w == 0.0)
    return var_means == 0.0 ? std::sqrt((static_cast<double>(r) - 1.0) / r)
                            : std::numeric_limits<double>::infinity();
  const double rr = static_cast<double>(r);
  return std::sqrt((rr - 1.0) / rr + var_means / w);
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::pair<double, double> hdi_interval(std::vector<double> values, double mass) {
  if (values.size() < 2) throw DomainError("hdi needs at least 2 draws");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  const size_t span = std::max<size_t>(1, static_cast<size_t>(std::ceil(mass * n)) - 1);
  size_t best = 0;
  double best_width = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + span < n; ++i) {
    const double width = values[i + span] - values[i];
    if (width < best_width) {
      best_width = width;
      best = i;
    }
  }
  return {values[best], values[best + span]};
}

namespace {

std::pair<double, double> interval_of(std::vector<double> draws, IntervalKind kind) {
  if (kind == IntervalKind::HighestDensity) return hdi_interval(std::move(draws), 0.95);
  return {quantile(draws, 0.025), quantile(draws, 0.975)};
}

}  // namespace

BetaSummary conditional_mean_beta(const std::vector<ChainTrace>& traces, int jump,
                                  IntervalKind kind) {
  check_traces(traces);
  BetaSummary out;
  long total = 0, on = 0;
  std::vector<double> cond_draws;
  for (const auto& t : traces) {
    if (jump < 0 || jump >= t.seasons - 1) throw DomainError("jump index out of range");
    for (int r = 0; r < t.size(); ++r) {
      ++total;
      if (t.gamma[r][jump]) {
        ++on;
        cond_draws.push_back(t.beta[r](jump));
      }
    }
  }
  out.inclusion_prob = static_cast<double>(on) / static_cast<double>(total);
  if (!cond_draws.empty()) {
    out.cond_mean = std::accumulate(cond_draws.begin(), cond_draws.end(), 0.0) /
                    static_cast<double>(cond_draws.size());
    if (cond_draws.size() >= 2) out.cond_bci = interval_of(cond_draws, kind);
    else out.cond_bci = std::make_pair(cond_draws[0], cond_draws[0]);
  }
  return out;
}

double absolute_timecourse(const std::vector<ChainTrace>& traces, int season) {
  check_traces(traces);
  double acc = 0.0;
  long total = 0;
  for (const auto& t : traces) {
    if (season < 0 || season >= t.seasons) throw DomainError("season index out of range");
    for (int r = 0; r < t.size(); ++r) {
      double v = t.alpha[r].mean();
      for (int k = 0; k < season; ++k)
        if (t.gamma[r][k]) v += t.beta[r](k);
      acc += v;
      ++total;
    }
  }
  return acc / static_cast<double>(total);
}

double model_posterior_prob(const std::vector<ChainTrace>& traces,
                            const std::vector<int>& on_jumps, PatternRestrict restrict) {
  check_traces(traces);
  long total = 0, hits = 0;
  for (const auto& t : traces) {
    std::vector<char> required(t.seasons - 1, 0);
    for (int j : on_jumps) {
      if (j < 0 || j >= t.seasons - 1) throw DomainError("pattern jump index out of range");
      required[j] = 1;
    }
    for (int r = 0; r < t.size(); ++r) {
      ++total;
      bool ok = true;
      for (int j = 0; j < t.seasons - 1 && ok; ++j) {
        if (required[j] && !t.gamma[r][j]) ok = false;
        if (!required[j] && restrict == PatternRestrict::Exact && t.gamma[r][j]) ok = false;
      }
      if (ok) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

NeighborProb neighbor_probability(const std::vector<ChainTrace>& traces, int seg_a, int seg_b,
                                  double rho_threshold) {
  check_traces(traces);
  long total = 0, exceed = 0, adjacent = 0;
  for (const auto& t : traces) {
    if (!cov_kind_has_rho(t.cov_kind))
      throw DomainError("neighbor probability needs a correlation-bearing trace");
    if (seg_a < 0 || seg_a >= t.segments || seg_b < 0 || seg_b >= t.segments || seg_a == seg_b)
      throw DomainError("bad segment pair");
    for (int r = 0; r < t.size(); ++r) {
      ++total;
      if (t.rho[r] > rho_threshold) {
        ++exceed;
        int pos_a = -1, pos_b = -1;
        for (int k = 0; k < t.segments; ++k) {
          if (t.perm[r][k] == seg_a) pos_a = k;
          if (t.perm[r][k] == seg_b) pos_b = k;
        }
        if (std::abs(pos_a - pos_b) == 1) ++adjacent;
      }
    }
  }
  if (exceed == 0)
    throw DomainError("no retained iterations with rho above the threshold; "
                      "conditional probability undefined");
  NeighborProb out;
  out.conditional = static_cast<double>(adjacent) / static_cast<double>(exceed);
  out.rho_exceed_prob = static_cast<double>(exceed) / static_cast<double>(total);
  return out;
}

double bayes_factor(double posterior_odds, double prior_odds) {
  if (!(posterior_odds > 0.0) || !(prior_odds > 0.0))
    throw DomainError("odds must be positive");
  return posterior_odds / prior_odds;
}

std::vector<ShrinkageRow> shrinkage_table(const std::vector<ChainTrace>& traces,
                                          const RealizationStore& store, IntervalKind kind) {
  check_traces(traces);
  store.validate();
  const int n = store.segments();
  const int seasons = store.seasons();
  const int draws = store.samples();

  // Hierarchical draws: the resampled realizations pointed at by `selected`.
  std::vector<std::vector<std::vector<double>>> hier(
      n, std::vector<std::vector<double>>(seasons));
  for (const auto& t : traces) {
    if (t.segments != n || t.seasons != seasons)
      throw DomainError("trace and store shapes differ");
    for (int r = 0; r < t.size(); ++r) {
      for (int i = 0; i < n; ++i) {
        const int m = t.selected[r][i];
        if (m < 0 || m >= draws)
          throw ValidationError("trace selected index out of range: trace corrupt");
        for (int j = 0; j < seasons; ++j) hier[i][j].push_back(store.data[i](m, j));
      }
    }
  }

  std::vector<double> grand(seasons, 0.0);
  for (int j = 0; j < seasons; ++j) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += store.data[i].col(j).mean();
    grand[j] = acc / n;
  }

  std::vector<ShrinkageRow> rows;
  rows.reserve(static_cast<size_t>(n) * seasons);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < seasons; ++j) {
      ShrinkageRow row;
      row.segment = i;
      row.season = j;
      std::vector<double> strat(store.data[i].col(j).data(),
                                store.data[i].col(j).data() + draws);
      row.strat_mean = std::accumulate(strat.begin(), strat.end(), 0.0) / strat.size();
      auto [slo, shi] = interval_of(strat, kind);
      row.strat_lo = slo;
      row.strat_hi = shi;
      const auto& h = hier[i][j];
      row.hier_mean = std::accumulate(h.begin(), h.end(), 0.0) / h.size();
      auto [hlo, hhi] = interval_of(h, kind);
      row.hier_lo = hlo;
      row.hier_hi = hhi;
      row.grand_mean = grand[j];
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<std::string> trace_parameter_names(const ChainTrace& trace) {
  std::vector<std::string> names;
  for (int i = 0; i < trace.segments; ++i) names.push_back("alpha_" + std::to_string(i + 1));
  for (int j = 0; j < trace.seasons - 1; ++j) names.push_back("beta_" + std::to_string(j + 1));
  if (trace.cov_kind == CovKind::UNS) {
    for (int i = 0; i < trace.segments; ++i)
      names.push_back("cov_" + std::to_string(i + 1) + "_" + std::to_string(i + 1));
  } else {
    names.push_back("sigma2");
    if (cov_kind_has_rho(trace.cov_kind)) names.push_back("rho");
  }
  return names;
}

std::vector<double> trace_parameter_series(const ChainTrace& trace, const std::string& name) {
  std::vector<double> out;
  out.reserve(trace.size());
  auto starts_with = [&](const std::string& prefix) {
    return name.rfind(prefix, 0) == 0;
  };
  if (starts_with("alpha_")) {
    const int i = std::stoi(name.substr(6)) - 1;
    if (i < 0 || i >= trace.segments) throw DomainError("unknown parameter " + name);
    for (int r = 0; r < trace.size(); ++r) out.push_back(trace.alpha[r](i));
  } else if (starts_with("beta_")) {
    const int j = std::stoi(name.substr(5)) - 1;
    if (j < 0 || j >= trace.seasons - 1) throw DomainError("unknown parameter " + name);
    for (int r = 0; r < trace.size(); ++r) out.push_back(trace.beta[r](j));
  } else if (name == "sigma2") {
    out = trace.sigma2;
  } else if (name == "rho") {
    out = trace.rho;
  } else if (starts_with("cov_")) {
    const auto rest = name.substr(4);
    const auto sep = rest.find('_');
    if (sep == std::string::npos) throw DomainError("unknown parameter " + name);
    const int i = std::stoi(rest.substr(0, sep)) - 1;
    const int j = std::stoi(rest.substr(sep + 1)) - 1;
    for (int r = 0; r < trace.size(); ++r) out.push_back(trace.cov_matrix[r](i, j));
  } else {
    throw DomainError("unknown parameter " + name);
  }
  return out;
}

}  // namespace dyirma
