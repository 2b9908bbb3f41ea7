#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "dyirma/pipeline.hpp"

namespace {

// Exit codes: 0 ok, 1 usage, 2 config, 3 data, 4 numerical/domain,
// 5 convergence gate.
int run(int argc, char** argv) {
  CLI::App app{"dyirma: joint hierarchical re-analysis of stored per-stratum MCMC draws"};
  app.require_subcommand(1);
  app.fallthrough();  // allow --config after the subcommand

  std::string config_path;
  int jobs = 0;
  bool force = false;
  std::optional<long> seed_override;

  app.add_option("--config", config_path, "path to the run config file")->required();
  app.add_option("--jobs", jobs, "max concurrent chains (0 = all)");
  app.add_flag("--force", force, "report even when the convergence gate fails");
  app.add_option("--seed", seed_override, "override sampler.seed from the config");

  auto* synthesize = app.add_subcommand("synthesize", "write synthetic fixture files");
  auto* fit = app.add_subcommand("fit", "run the DyIRMA chains");
  auto* report = app.add_subcommand("report", "emit the posterior summary tables");
  auto* diagnose = app.add_subcommand("diagnose", "emit the diagnostics table only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;  // usage problems are config errors
  }

  dyirma::RunConfig config = dyirma::parse_run_config(config_path);
  if (seed_override) config.sampler.seed = static_cast<std::uint64_t>(*seed_override);

  if (synthesize->parsed()) {
    dyirma::cmd_synthesize(config);
    std::cout << "wrote fixtures under " << config.output_dir.string() << "\n";
  } else if (fit->parsed()) {
    dyirma::cmd_fit(config, jobs);
    std::cout << "wrote " << config.sampler.chains << " trace file(s) under "
              << config.output_dir.string() << "\n";
  } else if (report->parsed()) {
    dyirma::cmd_report(config, force);
    std::cout << "wrote report tables under " << config.output_dir.string() << "\n";
  } else if (diagnose->parsed()) {
    dyirma::cmd_diagnose(config);
    std::cout << "wrote diagnostics under " << config.output_dir.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const dyirma::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dyirma::IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dyirma::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dyirma::ValidationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dyirma::ConvergenceGateError& e) {
    std::cerr << "convergence gate: " << e.what() << "\n";
    return 5;
  } catch (const dyirma::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const dyirma::DomainError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
