#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dyirma/sampler.hpp"

namespace dyirma {

/// Fixture synthesis settings.
struct SynthConfig {
  bool present = false;
  std::string mode = "hierarchical";  // hierarchical | coalescent
  int segments = 4;
  int seasons = 6;
  int samples = 200;
  std::uint64_t seed = 1;

  // hierarchical mode
  double noise_sd = 0.1;
  double sigma2 = 0.25;
  int jump_season = 0;  // 1-based season the jump leads into; 0 = none
  double jump_size = 0.0;
  std::vector<double> alpha;  // optional truth; generated when empty
  int prior_samples = 400;
  double prior_lo = 0.2;
  double prior_hi = 12.0;

  // coalescent mode
  int taxa_per_season = 5;
  double season_spacing = 1.0;
  double phi_min = 1.0;
  double phi_max = 1.0;
  int phi_groups = 1;
};

/// One declarative config file drives every subcommand.
struct RunConfig {
  std::filesystem::path realizations_dir;
  std::filesystem::path prior_file;
  std::filesystem::path output_dir;

  SamplerConfig sampler;

  double kde_epsilon = 0.0;  // <= 0 selects the data-driven floor
  int kde_exponent_sign = -1;
  std::vector<double> kde_bandwidths;  // empty selects Scott's rule

  bool iteration_log = false;  // write per-iteration ESS files during fit

  double rho_threshold = 0.2;
  std::vector<std::vector<int>> gamma_patterns;  // 0-based jump indices
  std::vector<std::vector<std::string>> neighbor_groups;
  bool use_hdi = false;

  SynthConfig synth;

  void validate_for_fit() const;
  void validate_for_synthesize() const;
  void validate_for_report() const;
};

/// Parses the key = value section file. Unknown sections or keys are
/// rejected so typos cannot silently change a run.
RunConfig parse_run_config(const std::filesystem::path& path);

}  // namespace dyirma
