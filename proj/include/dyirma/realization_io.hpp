#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "dyirma/errors.hpp"

namespace dyirma {

/// Per-stratum matrices of stored MCMC draws. data[i] holds segment i as an
/// M x J matrix (one row per stored draw, one column per season).
struct RealizationStore {
  std::vector<Eigen::MatrixXd> data;
  std::vector<std::string> segment_labels;
  std::vector<std::string> season_labels;

  int segments() const { return static_cast<int>(data.size()); }
  int seasons() const { return static_cast<int>(season_labels.size()); }
  int samples() const { return data.empty() ? 0 : static_cast<int>(data[0].rows()); }

  /// Checks finiteness, nonnegativity and rectangular shape.
  void validate() const;
};

/// Draws from the shared prior simulation, M_p x J. A single simulation
/// serves every segment because all strata assume the same prior.
struct PriorSamples {
  Eigen::MatrixXd data;
  std::vector<std::string> season_labels;

  int sample_count() const { return static_cast<int>(data.rows()); }
  int seasons() const { return static_cast<int>(data.cols()); }

  void validate() const;
};

/// Loads one realization file per segment from `dir` (every *.tsv, sorted by
/// filename; the stem becomes the segment label). Header row carries season
/// labels, each data row is one stored draw.
RealizationStore load_realizations(const std::filesystem::path& dir, int expected_seasons);

/// Same, with an explicit file list; labels are the file stems.
RealizationStore load_realizations(const std::vector<std::filesystem::path>& files,
                                   int expected_seasons);

PriorSamples load_prior_samples(const std::filesystem::path& path, int expected_seasons);

/// Writes a single segment (or prior) matrix in the realization format.
void save_realization_file(const std::filesystem::path& path,
                           const std::vector<std::string>& season_labels,
                           const Eigen::MatrixXd& values);

/// Formats a double with 17 significant digits (binary64 round-trip safe).
std::string format_double(double v);

}  // namespace dyirma
