#include "dyirma/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dyirma/analysis.hpp"
#include "dyirma/coalescent.hpp"

namespace dyirma {

namespace {

using nlohmann::json;

std::string season_label(int j) {
  std::ostringstream os;
  os << "season_" << std::setw(2) << std::setfill('0') << (j + 1);
  return os.str();
}

std::string segment_file_name(int i) {
  std::ostringstream os;
  os << "seg_" << std::setw(2) << std::setfill('0') << (i + 1) << ".tsv";
  return os.str();
}

std::vector<std::string> season_labels(int seasons) {
  std::vector<std::string> labels(seasons);
  for (int j = 0; j < seasons; ++j) labels[j] = season_label(j);
  return labels;
}

void write_tsv_row(std::ofstream& out, const std::vector<std::string>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out << '\t';
    out << cells[i];
  }
  out << '\n';
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

GammaKernelKde build_kde(const RunConfig& config, const PriorSamples& prior) {
  std::optional<Eigen::VectorXd> override_bw;
  if (!config.kde_bandwidths.empty()) {
    Eigen::VectorXd b(config.kde_bandwidths.size());
    for (size_t k = 0; k < config.kde_bandwidths.size(); ++k) b(k) = config.kde_bandwidths[k];
    override_bw = b;
  } else if (config.kde_exponent_sign != -1) {
    override_bw = scott_bandwidths(prior.data, config.kde_exponent_sign);
  }
  if (config.kde_epsilon > 0.0)
    return GammaKernelKde(prior.data, config.kde_epsilon, override_bw);
  if (override_bw) {
    // Data-driven floor with a bandwidth override: provisional fit first.
    GammaKernelKde provisional(prior.data, std::numeric_limits<double>::min(), override_bw);
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
    const double eps = std::exp((used ? acc / used : 0.0) - 10.0);
    return GammaKernelKde(prior.data, std::max(eps, std::numeric_limits<double>::min()),
                          override_bw);
  }
  return fit_gamma_kde(prior.data);
}

bool group_contiguous(const std::vector<int>& perm, const std::vector<int>& members) {
  int lo = static_cast<int>(perm.size()), hi = -1;
  for (size_t pos = 0; pos < perm.size(); ++pos) {
    if (std::find(members.begin(), members.end(), perm[pos]) != members.end()) {
      lo = std::min(lo, static_cast<int>(pos));
      hi = std::max(hi, static_cast<int>(pos));
    }
  }
  return hi - lo + 1 == static_cast<int>(members.size());
}

// Exact prior probability that every group occupies consecutive positions
// under uniformly random permutations, by enumeration.
double uniform_permutation_prior(int n, const std::vector<std::vector<int>>& groups) {
  if (n > 10) throw ConfigError("group prior enumeration supports at most 10 segments");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  long total = 0, hits = 0;
  do {
    ++total;
    bool ok = true;
    for (const auto& g : groups)
      if (!group_contiguous(perm, g)) {
        ok = false;
        break;
      }
    if (ok) ++hits;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<ChainTrace> load_all_traces(const RunConfig& config) {
  std::vector<ChainTrace> traces;
  const auto paths = trace_paths(config);
  for (size_t c = 0; c < paths.size(); ++c) {
    if (!std::filesystem::exists(paths[c])) break;
    traces.push_back(load_trace(paths[c], config.sampler.cov_kind, static_cast<int>(c)));
  }
  if (traces.empty())
    throw IoError("no trace files found under " + config.output_dir.string() +
                  " (run fit first)");
  return traces;
}

struct DiagnosticsTable {
  std::vector<std::string> names;
  std::vector<double> rhats;                     // NaN when single chain
  std::vector<std::vector<double>> geweke;       // [param][chain]
};

DiagnosticsTable compute_diagnostics(const std::vector<ChainTrace>& traces) {
  DiagnosticsTable table;
  table.names = trace_parameter_names(traces[0]);
  for (const auto& name : table.names) {
    std::vector<std::vector<double>> series;
    for (const auto& t : traces) series.push_back(trace_parameter_series(t, name));
    double r = std::numeric_limits<double>::quiet_NaN();
    if (traces.size() >= 2) {
      const size_t len = std::min_element(series.begin(), series.end(),
                                          [](const auto& a, const auto& b) {
                                            return a.size() < b.size();
                                          })->size();
      std::vector<std::vector<double>> trimmed;
      for (auto& s : series) trimmed.emplace_back(s.begin(), s.begin() + len);
      r = rhat(trimmed);
    }
    table.rhats.push_back(r);
    std::vector<double> z;
    for (const auto& s : series)
      z.push_back(s.size() >= 100 ? geweke_z(s) : std::numeric_limits<double>::quiet_NaN());
    table.geweke.push_back(std::move(z));
  }
  return table;
}

void write_diagnostics_tsv(const RunConfig& config, const DiagnosticsTable& table,
                           size_t chains) {
  auto out = open_out(config.output_dir / "diagnostics.tsv");
  std::vector<std::string> header = {"parameter", "rhat"};
  for (size_t c = 0; c < chains; ++c) header.push_back("geweke_z_chain" + std::to_string(c));
  write_tsv_row(out, header);
  for (size_t p = 0; p < table.names.size(); ++p) {
    std::vector<std::string> row = {table.names[p],
                                    std::isnan(table.rhats[p]) ? "NA"
                                                               : format_double(table.rhats[p])};
    for (double z : table.geweke[p])
      row.push_back(std::isnan(z) ? "NA" : format_double(z));
    write_tsv_row(out, row);
  }
}

}  // namespace

std::vector<std::filesystem::path> trace_paths(const RunConfig& config) {
  std::vector<std::filesystem::path> out;
  for (int c = 0; c < config.sampler.chains; ++c)
    out.push_back(config.output_dir / ("trace_chain" + std::to_string(c) + ".tsv"));
  return out;
}

void cmd_synthesize(const RunConfig& config) {
  config.validate_for_synthesize();
  const auto& s = config.synth;
  std::filesystem::create_directories(config.output_dir);
  const auto realizations_dir = config.output_dir / "realizations";
  std::filesystem::create_directories(realizations_dir);

  const auto labels = season_labels(s.seasons);
  json manifest;
  manifest["mode"] = s.mode;
  manifest["segments"] = s.segments;
  manifest["seasons"] = s.seasons;
  manifest["samples"] = s.samples;
  manifest["seed"] = s.seed;

  if (s.mode == "hierarchical") {
    RngEngine rng(s.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<double> alpha = s.alpha;
    if (alpha.empty()) {
      alpha.resize(s.segments);
      for (int i = 0; i < s.segments; ++i) alpha[i] = 2.0 + 0.2 * i;
    }
    std::vector<double> beta(s.seasons - 1, 0.0);
    std::vector<int> gamma(s.seasons - 1, 0);
    if (s.jump_season >= 2) {
      beta[s.jump_season - 2] = s.jump_size;
      gamma[s.jump_season - 2] = 1;
    }

    // True per-cell TMRCAs from the additive model, then iid stratified
    // draws around the truth.
    Eigen::MatrixXd truth(s.segments, s.seasons);
    const double sd = std::sqrt(s.sigma2);
    for (int j = 0; j < s.seasons; ++j) {
      double offset = 0.0;
      for (int k = 0; k < j; ++k)
        if (gamma[k]) offset += beta[k];
      for (int i = 0; i < s.segments; ++i)
        truth(i, j) = alpha[i] + offset + sd * normal(rng);
    }

    for (int i = 0; i < s.segments; ++i) {
      Eigen::MatrixXd draws(s.samples, s.seasons);
      for (int m = 0; m < s.samples; ++m)
        for (int j = 0; j < s.seasons; ++j) {
          const double v = truth(i, j) + s.noise_sd * normal(rng);
          if (v < 0.0)
            throw ConfigError("synthesized negative time; raise alpha or lower noise_sd");
          draws(m, j) = v;
        }
      save_realization_file(realizations_dir / segment_file_name(i), labels, draws);
    }

    std::uniform_real_distribution<double> unif(s.prior_lo, s.prior_hi);
    Eigen::MatrixXd prior(s.prior_samples, s.seasons);
    for (int m = 0; m < s.prior_samples; ++m)
      for (int j = 0; j < s.seasons; ++j) prior(m, j) = unif(rng);
    save_realization_file(config.output_dir / "prior.tsv", labels, prior);

    manifest["truth"]["alpha"] = alpha;
    manifest["truth"]["beta"] = beta;
    manifest["truth"]["gamma"] = gamma;
    manifest["truth"]["jump_season"] = s.jump_season;
    manifest["truth"]["sigma2"] = s.sigma2;
    manifest["truth"]["noise_sd"] = s.noise_sd;
    manifest["truth"]["t_true"] = std::vector<std::vector<double>>();
    for (int i = 0; i < s.segments; ++i) {
      std::vector<double> row(s.seasons);
      for (int j = 0; j < s.seasons; ++j) row[j] = truth(i, j);
      manifest["truth"]["t_true"].push_back(row);
    }
  } else {
    const auto schedule = SamplingSchedule::regular(
        std::vector<int>(s.seasons, s.taxa_per_season), s.season_spacing);
    const PhiHyperprior hyper{s.phi_min, s.phi_max, s.phi_groups};
    for (int i = 0; i < s.segments; ++i) {
      const PriorSamples draws =
          sample_prior_tmrca(schedule, hyper, s.samples, s.seed + 1 + i);
      save_realization_file(realizations_dir / segment_file_name(i), labels, draws.data);
    }
    const PriorSamples prior = sample_prior_tmrca(schedule, hyper, s.samples, s.seed);
    save_realization_file(config.output_dir / "prior.tsv", labels, prior.data);
    manifest["schedule"]["taxa_per_season"] = s.taxa_per_season;
    manifest["schedule"]["season_spacing"] = s.season_spacing;
    manifest["phi"]["min"] = s.phi_min;
    manifest["phi"]["max"] = s.phi_max;
    manifest["phi"]["groups"] = s.phi_groups;
  }

  auto out = open_out(config.output_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

void cmd_fit(const RunConfig& config, int jobs) {
  config.validate_for_fit();
  std::filesystem::create_directories(config.output_dir);

  const RealizationStore store = load_realizations(config.realizations_dir, 0);
  const PriorSamples prior = load_prior_samples(config.prior_file, store.seasons());
  const GammaKernelKde kde = build_kde(config, prior);

  std::vector<ChainDiagnostics> diags;
  std::vector<std::vector<double>> ess;
  const std::vector<ChainTrace> traces =
      run_chains(config.sampler, store, kde, jobs, &diags,
                 config.iteration_log ? &ess : nullptr);

  const auto paths = trace_paths(config);
  for (size_t c = 0; c < traces.size(); ++c) save_trace(traces[c], paths[c]);

  if (config.iteration_log) {
    const int n = store.segments();
    for (size_t c = 0; c < ess.size(); ++c) {
      auto out = open_out(config.output_dir / ("ess_chain" + std::to_string(c) + ".tsv"));
      out << "iteration";
      for (int i = 0; i < n; ++i) out << "\tess_" << store.segment_labels[i];
      out << '\n';
      for (size_t t = 0; t * n < ess[c].size(); ++t) {
        out << (t + 1);
        for (int i = 0; i < n; ++i) out << '\t' << format_double(ess[c][t * n + i]);
        out << '\n';
      }
    }
  }

  auto log = open_out(config.output_dir / "run_log.jsonl");
  for (size_t c = 0; c < diags.size(); ++c) {
    json rec;
    rec["event"] = "chain";
    rec["chain"] = c;
    rec["seed"] = diags[c].seed;
    rec["iterations"] = diags[c].iterations;
    rec["accept_cov"] = diags[c].cov_accept_rate();
    rec["accept_perm"] = diags[c].perm_accept_rate();
    rec["ess_q05"] = diags[c].ess_q05;
    rec["ess_q50"] = diags[c].ess_q50;
    rec["ess_q95"] = diags[c].ess_q95;
    rec["low_ess_streaks"] = diags[c].low_ess_streaks;
    rec["step_sigma2_final"] = diags[c].step_sigma2_final;
    rec["step_rho_final"] = diags[c].step_rho_final;
    rec["wall_ms"] = diags[c].wall_ms;
    log << rec.dump() << '\n';
  }
}

void cmd_diagnose(const RunConfig& config) {
  config.validate_for_report();
  const auto traces = load_all_traces(config);
  const auto table = compute_diagnostics(traces);
  write_diagnostics_tsv(config, table, traces.size());
}

void cmd_report(const RunConfig& config, bool force) {
  config.validate_for_report();
  const auto traces = load_all_traces(config);
  const RealizationStore store = load_realizations(config.realizations_dir, 0);
  const IntervalKind kind =
      config.use_hdi ? IntervalKind::HighestDensity : IntervalKind::EqualTailed;

  const auto table = compute_diagnostics(traces);
  write_diagnostics_tsv(config, table, traces.size());
  if (!force) {
    std::string bad;
    for (size_t p = 0; p < table.names.size(); ++p) {
      if (!std::isnan(table.rhats[p]) && table.rhats[p] > 1.1)
        bad += (bad.empty() ? "" : ", ") + table.names[p];
    }
    if (!bad.empty())
      throw ConvergenceGateError("Rhat above 1.1 for: " + bad +
                                 " (rerun with --force to report anyway)");
  }

  const int seasons = traces[0].seasons;
  const int segments = traces[0].segments;

  {
    auto out = open_out(config.output_dir / "timecourse.tsv");
    write_tsv_row(out, {"season", "inclusion_prob", "relative_mean", "relative_lo",
                        "relative_hi", "absolute_mean"});
    for (int j = 0; j < seasons; ++j) {
      std::vector<std::string> row;
      row.push_back(store.season_labels.size() == static_cast<size_t>(seasons)
                        ? store.season_labels[j]
                        : season_label(j));
      if (j == 0) {
        row.insert(row.end(), {"NA", "NA", "NA", "NA"});
      } else {
        const BetaSummary s = conditional_mean_beta(traces, j - 1, kind);
        row.push_back(format_double(s.inclusion_prob));
        row.push_back(s.cond_mean ? format_double(*s.cond_mean) : "NA");
        row.push_back(s.cond_bci ? format_double(s.cond_bci->first) : "NA");
        row.push_back(s.cond_bci ? format_double(s.cond_bci->second) : "NA");
      }
      row.push_back(format_double(absolute_timecourse(traces, j)));
      write_tsv_row(out, row);
    }
  }

  {
    auto out = open_out(config.output_dir / "segments.tsv");
    write_tsv_row(out, {"segment", "mean", "lo", "hi"});
    for (int i = 0; i < segments; ++i) {
      std::vector<double> draws;
      for (const auto& t : traces)
        for (int r = 0; r < t.size(); ++r) draws.push_back(t.alpha[r](i));
      const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / draws.size();
      const auto lohi = kind == IntervalKind::HighestDensity
                            ? hdi_interval(draws, 0.95)
                            : std::make_pair(quantile(draws, 0.025), quantile(draws, 0.975));
      write_tsv_row(out, {store.segment_labels[i], format_double(mean),
                          format_double(lohi.first), format_double(lohi.second)});
    }
  }

  const bool permuting = cov_kind_permutable(traces[0].cov_kind);
  if (permuting && cov_kind_has_rho(traces[0].cov_kind)) {
    auto out = open_out(config.output_dir / "neighbors.tsv");
    write_tsv_row(out, {"segment_a", "segment_b", "prob_given_rho", "rho_exceed_prob"});
    for (int a = 0; a < segments; ++a) {
      for (int b = a + 1; b < segments; ++b) {
        const NeighborProb np = neighbor_probability(traces, a, b, config.rho_threshold);
        write_tsv_row(out, {store.segment_labels[a], store.segment_labels[b],
                            format_double(np.conditional), format_double(np.rho_exceed_prob)});
      }
    }
  }

  {
    auto out = open_out(config.output_dir / "bayes_factors.tsv");
    write_tsv_row(out, {"grouping", "posterior_prob", "prior_prob", "bayes_factor"});
    if (permuting && !config.neighbor_groups.empty()) {
      auto label_index = [&](const std::string& label) {
        const auto it = std::find(store.segment_labels.begin(), store.segment_labels.end(),
                                  label);
        if (it == store.segment_labels.end())
          throw ConfigError("neighbor_groups: unknown segment label '" + label + "'");
        return static_cast<int>(it - store.segment_labels.begin());
      };
      std::vector<std::vector<int>> groups;
      for (const auto& g : config.neighbor_groups) {
        std::vector<int> members;
        for (const auto& label : g) members.push_back(label_index(label));
        groups.push_back(std::move(members));
      }
      auto posterior_of = [&](const std::vector<std::vector<int>>& gs) {
        long total = 0, hits = 0;
        for (const auto& t : traces)
          for (int r = 0; r < t.size(); ++r) {
            ++total;
            bool ok = true;
            for (const auto& g : gs)
              if (!group_contiguous(t.perm[r], g)) {
                ok = false;
                break;
              }
            if (ok) ++hits;
          }
        return static_cast<double>(hits) / static_cast<double>(total);
      };
      auto emit = [&](const std::string& name, const std::vector<std::vector<int>>& gs) {
        const double post = posterior_of(gs);
        const double prior = uniform_permutation_prior(segments, gs);
        const std::string bf = post > 0.0 && prior > 0.0
                                   ? format_double(bayes_factor(post, prior))
                                   : "NA";
        write_tsv_row(out, {name, format_double(post), format_double(prior), bf});
      };
      for (size_t g = 0; g < groups.size(); ++g) {
        std::string name = "{";
        for (size_t k = 0; k < config.neighbor_groups[g].size(); ++k)
          name += (k ? "," : "") + config.neighbor_groups[g][k];
        name += "}";
        emit(name, {groups[g]});
      }
      if (groups.size() > 1) emit("all", groups);
    }
    // Gamma pattern probabilities ride along in the same table.
    for (const auto& pattern : config.gamma_patterns) {
      const double post = model_posterior_prob(traces, pattern, PatternRestrict::Exact);
      const double prior = std::pow(0.5, seasons - 1);  // reference: uniform over 2^(J-1)
      std::string name = "gamma{";
      for (size_t k = 0; k < pattern.size(); ++k)
        name += (k ? "," : "") + std::to_string(pattern[k] + 1);
      name += "}";
      write_tsv_row(out, {name, format_double(post), format_double(prior),
                          post > 0.0 ? format_double(bayes_factor(post, prior)) : "NA"});
    }
  }

  {
    auto out = open_out(config.output_dir / "shrinkage.tsv");
    write_tsv_row(out, {"segment", "season", "source", "mean", "lo", "hi"});
    const auto rows = shrinkage_table(traces, store, kind);
    for (const auto& r : rows) {
      write_tsv_row(out, {store.segment_labels[r.segment], store.season_labels[r.season],
                          "stratified", format_double(r.strat_mean), format_double(r.strat_lo),
                          format_double(r.strat_hi)});
      write_tsv_row(out, {store.segment_labels[r.segment], store.season_labels[r.season],
                          "hierarchical", format_double(r.hier_mean), format_double(r.hier_lo),
                          format_double(r.hier_hi)});
    }
    for (int j = 0; j < seasons; ++j) {
      const auto it = std::find_if(rows.begin(), rows.end(),
                                   [&](const ShrinkageRow& r) { return r.season == j; });
      if (it != rows.end())
        write_tsv_row(out, {"ALL", store.season_labels[j], "grand_mean",
                            format_double(it->grand_mean), "NA", "NA"});
    }
  }
}

}  // namespace dyirma
