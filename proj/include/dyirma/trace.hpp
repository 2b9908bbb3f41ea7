#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <vector>

#include "dyirma/hier_model.hpp"

namespace dyirma {

/// Thinned post-burn-in record of one chain. Row r of every member belongs to
/// the same retained iteration.
struct ChainTrace {
  int chain_id = 0;
  CovKind cov_kind = CovKind::IND;
  int segments = 0;
  int seasons = 0;

  std::vector<long> iterations;             // absolute 1-based iteration index
  std::vector<Eigen::VectorXd> alpha;       // n
  std::vector<Eigen::VectorXd> beta;        // J-1
  std::vector<std::vector<int>> gamma;      // J-1, 0/1
  std::vector<double> sigma2;               // scalar-kind rows
  std::vector<double> rho;                  // CS/AR1/TRI rows
  std::vector<Eigen::MatrixXd> cov_matrix;  // UNS rows
  std::vector<std::vector<int>> perm;       // position -> segment
  std::vector<std::vector<int>> selected;   // n realization indices

  int size() const { return static_cast<int>(iterations.size()); }
  bool empty() const { return iterations.empty(); }

  void validate() const;
};

/// Writes a trace as TSV: one header line, then one row per retained
/// iteration in fixed column order (iteration, alpha, beta, gamma,
/// covariance parameters, permutation, selected indices). Values round-trip
/// at 17 significant digits.
void save_trace(const ChainTrace& trace, const std::filesystem::path& path);

/// Reads a trace file. Shapes and the UNS/IND distinction come from the
/// header; CS, AR1 and TRI share a column layout, so correlation-bearing
/// files resolve to `kind_hint` (default CS). chain_id is not stored in the
/// file either and is taken from `chain_id`.
ChainTrace load_trace(const std::filesystem::path& path,
                      std::optional<CovKind> kind_hint = std::nullopt, int chain_id = 0);

}  // namespace dyirma
