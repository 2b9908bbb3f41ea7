#pragma once

#include <filesystem>
#include <vector>

#include "dyirma/config.hpp"

namespace dyirma {

/// Writes segment realization files, the prior file and a ground-truth
/// manifest into output_dir, per the [synth] block.
void cmd_synthesize(const RunConfig& config);

/// Loads the store and prior, fits the KDE, runs the configured chains
/// (at most `jobs` concurrently) and writes one trace per chain plus a
/// line-delimited JSON run log.
void cmd_fit(const RunConfig& config, int jobs = 0);

/// Emits the report tables from the traces in output_dir. Refuses when any
/// parameter's Rhat exceeds 1.1 unless force is set.
void cmd_report(const RunConfig& config, bool force = false);

/// Diagnostics table only, no gate.
void cmd_diagnose(const RunConfig& config);

/// Trace files written/read by fit and report, in chain order.
std::vector<std::filesystem::path> trace_paths(const RunConfig& config);

}  // namespace dyirma
