#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dyirma/analysis.hpp"
#include "dyirma/pipeline.hpp"

using namespace dyirma;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("dyirma_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const auto path = dir / "run.cfg";
  std::ofstream out(path);
  out << body;
  return path;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string fixture_config(const fs::path& out, int chains = 2, const std::string& cov = "ind",
                           const std::string& extra_model = "") {
  std::ostringstream os;
  os << "[paths]\n"
     << "realizations_dir = " << (out / "realizations").string() << "\n"
     << "prior_file = " << (out / "prior.tsv").string() << "\n"
     << "output_dir = " << out.string() << "\n\n"
     << "[model]\ncov = " << cov << "\n" << extra_model << "\n"
     << "[sampler]\niterations = 400\nburn_in = 0.1\nthinning = 2\nchains = " << chains
     << "\nseed = 7\n\n"
     << "[kde]\nepsilon = auto\n\n"
     << "[report]\nrho_threshold = 0.2\ngamma_patterns = 2\n\n"
     << "[synth]\nmode = hierarchical\nsegments = 2\nseasons = 3\nsamples = 50\nseed = 5\n"
     << "noise_sd = 0.1\nsigma2 = 0.2\njump_season = 2\njump_size = 2.0\n"
     << "prior_samples = 60\nprior_lo = 0.2\nprior_hi = 9\n";
  return os.str();
}

}  // namespace

TEST_CASE("config parser: values, lists, strictness") {
  const auto dir = temp_dir("cfg");
  const auto path = write_config(dir,
                                 "[model]\ncov = tri\npermute = true\n\n"
                                 "[sampler]\niterations = 123\nseed = 9\n\n"
                                 "[report]\ngamma_patterns = 2 ; 1,3\n"
                                 "neighbor_groups = a,b ; c,d,e\n");
  const auto cfg = parse_run_config(path);
  CHECK(cfg.sampler.cov_kind == CovKind::TRI);
  CHECK(cfg.sampler.permute);
  CHECK(cfg.sampler.iterations == 123);
  CHECK(cfg.gamma_patterns.size() == 2);
  CHECK(cfg.gamma_patterns[0] == std::vector<int>{1});
  CHECK(cfg.gamma_patterns[1] == std::vector<int>{0, 2});
  CHECK(cfg.neighbor_groups[1] == std::vector<std::string>{"c", "d", "e"});
}

TEST_CASE("config parser rejects unknown keys, sections and bad values") {
  const auto dir = temp_dir("cfgbad");
  CHECK_THROWS_WITH_AS(parse_run_config(write_config(dir, "[model]\ncovs = ind\n")),
                       doctest::Contains("unknown key 'covs'"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_run_config(write_config(dir, "[models]\ncov = ind\n")),
                       doctest::Contains("unknown section"), ConfigError);
  CHECK_THROWS_AS(parse_run_config(write_config(dir, "[model]\ncov = diag\n")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(write_config(dir, "[sampler]\niterations = ten\n")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(write_config(dir, "cov = ind\n")), ConfigError);
  CHECK_THROWS_AS(parse_run_config(write_config(dir, "[model]\ncov = ind\ncov = cs\n")),
                  ConfigError);
  CHECK_THROWS_AS(parse_run_config(dir / "missing.cfg"), ConfigError);
}

TEST_CASE("synthesize writes the documented fixture layout") {
  const auto out = temp_dir("synth");
  const auto cfg = parse_run_config(write_config(out, fixture_config(out)));
  cmd_synthesize(cfg);

  CHECK(fs::exists(out / "realizations" / "seg_01.tsv"));
  CHECK(fs::exists(out / "realizations" / "seg_02.tsv"));
  CHECK(fs::exists(out / "prior.tsv"));
  CHECK(fs::exists(out / "manifest.json"));

  const auto store = load_realizations(out / "realizations", 3);
  CHECK(store.segments() == 2);
  CHECK(store.samples() == 50);
  const auto prior = load_prior_samples(out / "prior.tsv", 3);
  CHECK(prior.sample_count() == 60);

  const std::string manifest = file_bytes(out / "manifest.json");
  CHECK(manifest.find("\"jump_season\": 2") != std::string::npos);
}

TEST_CASE("coalescent synthesis mode produces loadable fixtures") {
  const auto out = temp_dir("synthcoal");
  const auto cfg = parse_run_config(write_config(
      out, "[paths]\noutput_dir = " + out.string() +
               "\n\n[synth]\nmode = coalescent\nsegments = 2\nseasons = 3\nsamples = 40\n"
               "taxa_per_season = 3\nseason_spacing = 0.5\nphi_min = 1\nphi_max = 1\nseed = 3\n"));
  cmd_synthesize(cfg);
  const auto store = load_realizations(out / "realizations", 3);
  CHECK(store.segments() == 2);
  CHECK(store.samples() == 40);
  CHECK((store.data[0].array() >= 0.0).all());
}

TEST_CASE("fit writes traces and a run log with derived seeds; reruns are byte-identical") {
  const auto out = temp_dir("fit");
  const auto cfg = parse_run_config(write_config(out, fixture_config(out)));
  cmd_synthesize(cfg);
  cmd_fit(cfg, 2);

  const auto paths = trace_paths(cfg);
  REQUIRE(paths.size() == 2);
  for (const auto& p : paths) CHECK(fs::exists(p));
  const std::string log = file_bytes(out / "run_log.jsonl");
  CHECK(log.find("\"seed\":7") != std::string::npos);
  CHECK(log.find("\"seed\":8") != std::string::npos);

  const std::string first = file_bytes(paths[0]);
  const std::string second = file_bytes(paths[1]);
  cmd_fit(cfg, 1);
  CHECK(file_bytes(paths[0]) == first);
  CHECK(file_bytes(paths[1]) == second);

  const auto trace = load_trace(paths[0], cfg.sampler.cov_kind, 0);
  CHECK(trace.size() == cfg.sampler.retained_draws());
}

TEST_CASE("fit without the prior file is a data error naming the path") {
  const auto out = temp_dir("fitmissing");
  const auto cfg = parse_run_config(write_config(out, fixture_config(out)));
  cmd_synthesize(cfg);
  fs::remove(out / "prior.tsv");
  CHECK_THROWS_WITH_AS(cmd_fit(cfg, 1), doctest::Contains("prior.tsv"), IoError);
}

TEST_CASE("report emits the documented tables and honors feature gating") {
  const auto out = temp_dir("report");
  const auto cfg = parse_run_config(write_config(out, fixture_config(out)));
  cmd_synthesize(cfg);
  cmd_fit(cfg, 2);
  cmd_report(cfg, false);

  for (const char* name : {"timecourse.tsv", "segments.tsv", "bayes_factors.tsv",
                           "shrinkage.tsv", "diagnostics.tsv"})
    CHECK(fs::exists(out / name));
  CHECK(!fs::exists(out / "neighbors.tsv"));  // IND: no permutation machinery

  const std::string tc = file_bytes(out / "timecourse.tsv");
  CHECK(tc.find("season\tinclusion_prob") == 0);

  // segment intervals bracket their means
  std::ifstream seg(out / "segments.tsv");
  std::string line;
  std::getline(seg, line);
  while (std::getline(seg, line)) {
    std::istringstream row(line);
    std::string label;
    double mean, lo, hi;
    row >> label >> mean >> lo >> hi;
    CHECK(lo <= mean);
    CHECK(mean <= hi);
  }
}

TEST_CASE("synthesize is idempotent byte for byte") {
  const auto out = temp_dir("synthidem");
  const auto cfg = parse_run_config(write_config(out, fixture_config(out)));
  cmd_synthesize(cfg);
  const std::string seg = file_bytes(out / "realizations" / "seg_01.tsv");
  const std::string prior = file_bytes(out / "prior.tsv");
  cmd_synthesize(cfg);
  CHECK(file_bytes(out / "realizations" / "seg_01.tsv") == seg);
  CHECK(file_bytes(out / "prior.tsv") == prior);
}

TEST_CASE("report with a permuting covariance emits neighbors.tsv") {
  const auto out = temp_dir("reporttri");
  const auto cfg = parse_run_config(write_config(
      out, fixture_config(out, 2, "tri",
                          "permute = true\ninit_rho = 0.3\n"
                          "estimate_covariance = true\n")));
  cmd_synthesize(cfg);
  cmd_fit(cfg, 2);
  cmd_report(cfg, true);  // tiny chains may trip the gate; force
  CHECK(fs::exists(out / "neighbors.tsv"));
  const std::string nb = file_bytes(out / "neighbors.tsv");
  CHECK(nb.find("prob_given_rho") != std::string::npos);
}

TEST_CASE("diagnostics gate trips on deliberately divergent chains") {
  const auto out = temp_dir("gate");
  const auto cfg = parse_run_config(write_config(out, fixture_config(out)));
  cmd_synthesize(cfg);
  cmd_fit(cfg, 2);

  // Rewrite chain 1 with alpha offset by 100: Rhat must explode.
  auto t = load_trace(trace_paths(cfg)[1], cfg.sampler.cov_kind, 1);
  for (auto& a : t.alpha) a.array() += 100.0;
  save_trace(t, trace_paths(cfg)[1]);

  CHECK_THROWS_WITH_AS(cmd_report(cfg, false), doctest::Contains("alpha_1"),
                       ConvergenceGateError);
  cmd_report(cfg, true);
  CHECK(fs::exists(out / "timecourse.tsv"));
}

TEST_CASE("diagnose writes the diagnostics table without gating") {
  const auto out = temp_dir("diag");
  const auto cfg = parse_run_config(write_config(out, fixture_config(out)));
  cmd_synthesize(cfg);
  cmd_fit(cfg, 2);
  cmd_diagnose(cfg);
  CHECK(fs::exists(out / "diagnostics.tsv"));
}

#ifdef DYIRMA_CLI_PATH
TEST_CASE("cli binary: exit codes for config and data failures") {
  const auto out = temp_dir("exe");
  const std::string exe = DYIRMA_CLI_PATH;

  const auto bad_cfg = write_config(out, "[model]\nbogus = 1\n");
  const int config_rc =
      std::system((exe + " fit --config " + bad_cfg.string() + " 2>/dev/null").c_str());
  CHECK(WEXITSTATUS(config_rc) == 2);

  const auto ok_cfg = write_config(out, fixture_config(out));
  const int data_rc =
      std::system((exe + " fit --config " + ok_cfg.string() + " 2>/dev/null").c_str());
  CHECK(WEXITSTATUS(data_rc) == 3);  // fixtures not synthesized yet

  const int synth_rc = std::system(
      (exe + " synthesize --config " + ok_cfg.string() + " >/dev/null").c_str());
  CHECK(WEXITSTATUS(synth_rc) == 0);
  const int fit_rc =
      std::system((exe + " fit --config " + ok_cfg.string() + " >/dev/null").c_str());
  CHECK(WEXITSTATUS(fit_rc) == 0);
  const int report_rc =
      std::system((exe + " report --config " + ok_cfg.string() + " >/dev/null").c_str());
  CHECK(WEXITSTATUS(report_rc) == 0);
}
#endif
