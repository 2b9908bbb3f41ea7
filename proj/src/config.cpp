#include "dyirma/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>

namespace dyirma {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const std::string& v, const std::string& key) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

long parse_long(const std::string& v, const std::string& key) {
  long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  const std::string s = lower(v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError("key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    const std::string piece = trim(s.substr(start, pos == std::string::npos
                                                       ? std::string::npos
                                                       : pos - start));
    if (!piece.empty()) out.push_back(piece);
    if (pos == std::string::npos) return out;
    start = pos + 1;
  }
}

std::vector<double> parse_double_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  for (const auto& tok : split(v, ',')) out.push_back(parse_double(tok, key));
  return out;
}

using Section = std::map<std::string, std::string>;

std::map<std::string, Section> read_sections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, Section> sections;
  std::string line, current;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad section header");
      current = lower(trim(t.substr(1, t.size() - 2)));
      sections[current];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    if (current.empty())
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": key outside any [section]");
    const std::string key = lower(trim(t.substr(0, eq)));
    const std::string value = trim(t.substr(eq + 1));
    if (sections[current].count(key))
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": duplicate key '" +
                        key + "'");
    sections[current][key] = value;
  }
  return sections;
}

// Pulls a key out of a section, tracking which keys were consumed.
class SectionReader {
 public:
  SectionReader(const std::string& name, const Section& section)
      : name_(name), section_(section) {}

  bool has(const std::string& key) const { return section_.count(key) > 0; }

  std::string get(const std::string& key) {
    used_.insert(key);
    return section_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : section_) {
      if (!used_.count(key))
        throw ConfigError("unknown key '" + key + "' in section [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  const Section& section_;
  std::set<std::string> used_;
};

}  // namespace

RunConfig parse_run_config(const std::filesystem::path& path) {
  const auto sections = read_sections(path);
  const std::set<std::string> known = {"paths", "model", "sampler", "kde", "report", "synth"};
  for (const auto& [name, _] : sections)
    if (!known.count(name)) throw ConfigError("unknown section [" + name + "]");

  RunConfig cfg;
  static const Section empty;

  {
    SectionReader r("paths", sections.count("paths") ? sections.at("paths") : empty);
    if (r.has("realizations_dir")) cfg.realizations_dir = r.get("realizations_dir");
    if (r.has("prior_file")) cfg.prior_file = r.get("prior_file");
    if (r.has("output_dir")) cfg.output_dir = r.get("output_dir");
    r.finish();
  }

  {
    SectionReader r("model", sections.count("model") ? sections.at("model") : empty);
    auto& s = cfg.sampler;
    if (r.has("cov")) s.cov_kind = cov_kind_from_name(r.get("cov"));
    if (r.has("permute")) s.permute = parse_bool(r.get("permute"), "permute");
    if (r.has("estimate_covariance"))
      s.estimate_covariance = parse_bool(r.get("estimate_covariance"), "estimate_covariance");
    if (r.has("init_sigma2")) s.init_sigma2 = parse_double(r.get("init_sigma2"), "init_sigma2");
    if (r.has("init_rho")) s.init_rho = parse_double(r.get("init_rho"), "init_rho");
    if (r.has("mu_beta")) s.hyper.mu_beta = parse_double(r.get("mu_beta"), "mu_beta");
    if (r.has("tau_beta")) s.hyper.tau_beta = parse_double(r.get("tau_beta"), "tau_beta");
    if (r.has("p_inclusion"))
      s.hyper.p_inclusion = parse_double(r.get("p_inclusion"), "p_inclusion");
    if (r.has("mu_alpha")) s.hyper.mu_alpha = parse_double(r.get("mu_alpha"), "mu_alpha");
    if (r.has("tau_alpha")) s.hyper.tau_alpha = parse_double(r.get("tau_alpha"), "tau_alpha");
    if (r.has("wishart_nu")) s.hyper.wishart_nu = parse_double(r.get("wishart_nu"), "wishart_nu");
    if (r.has("ig_shape")) s.hyper.ig_shape = parse_double(r.get("ig_shape"), "ig_shape");
    if (r.has("ig_scale")) s.hyper.ig_scale = parse_double(r.get("ig_scale"), "ig_scale");
    if (r.has("rho_a")) s.hyper.rho_a = parse_double(r.get("rho_a"), "rho_a");
    if (r.has("rho_b")) s.hyper.rho_b = parse_double(r.get("rho_b"), "rho_b");
    if (r.has("mh_step_sigma2"))
      s.mh_step_sigma2 = parse_double(r.get("mh_step_sigma2"), "mh_step_sigma2");
    if (r.has("mh_step_rho")) s.mh_step_rho = parse_double(r.get("mh_step_rho"), "mh_step_rho");
    r.finish();
  }

  {
    SectionReader r("sampler", sections.count("sampler") ? sections.at("sampler") : empty);
    auto& s = cfg.sampler;
    if (r.has("iterations")) s.iterations = parse_long(r.get("iterations"), "iterations");
    if (r.has("burn_in")) s.burn_in_fraction = parse_double(r.get("burn_in"), "burn_in");
    if (r.has("thinning")) s.thinning = static_cast<int>(parse_long(r.get("thinning"), "thinning"));
    if (r.has("chains")) s.chains = static_cast<int>(parse_long(r.get("chains"), "chains"));
    if (r.has("seed")) s.seed = static_cast<std::uint64_t>(parse_long(r.get("seed"), "seed"));
    if (r.has("iteration_log"))
      cfg.iteration_log = parse_bool(r.get("iteration_log"), "iteration_log");
    r.finish();
  }

  {
    SectionReader r("kde", sections.count("kde") ? sections.at("kde") : empty);
    if (r.has("epsilon")) {
      const std::string v = lower(r.get("epsilon"));
      cfg.kde_epsilon = v == "auto" ? 0.0 : parse_double(v, "epsilon");
    }
    if (r.has("scott_exponent_sign"))
      cfg.kde_exponent_sign =
          static_cast<int>(parse_long(r.get("scott_exponent_sign"), "scott_exponent_sign"));
    if (r.has("bandwidths")) cfg.kde_bandwidths = parse_double_list(r.get("bandwidths"),
                                                                    "bandwidths");
    r.finish();
  }

  {
    SectionReader r("report", sections.count("report") ? sections.at("report") : empty);
    if (r.has("rho_threshold"))
      cfg.rho_threshold = parse_double(r.get("rho_threshold"), "rho_threshold");
    if (r.has("gamma_patterns")) {
      for (const auto& pat : split(r.get("gamma_patterns"), ';')) {
        std::vector<int> jumps;
        for (const auto& tok : split(pat, ','))
          jumps.push_back(static_cast<int>(parse_long(tok, "gamma_patterns")) - 1);
        cfg.gamma_patterns.push_back(std::move(jumps));
      }
    }
    if (r.has("neighbor_groups")) {
      for (const auto& grp : split(r.get("neighbor_groups"), ';')) {
        auto labels = split(grp, ',');
        if (labels.size() < 2)
          throw ConfigError("neighbor_groups entries need at least two labels");
        cfg.neighbor_groups.push_back(std::move(labels));
      }
    }
    if (r.has("intervals")) {
      const std::string v = lower(r.get("intervals"));
      if (v == "hdi") cfg.use_hdi = true;
      else if (v == "equal") cfg.use_hdi = false;
      else throw ConfigError("intervals must be 'equal' or 'hdi'");
    }
    r.finish();
  }

  {
    SectionReader r("synth", sections.count("synth") ? sections.at("synth") : empty);
    auto& s = cfg.synth;
    s.present = sections.count("synth") > 0;
    if (r.has("mode")) {
      s.mode = lower(r.get("mode"));
      if (s.mode != "hierarchical" && s.mode != "coalescent")
        throw ConfigError("synth mode must be 'hierarchical' or 'coalescent'");
    }
    if (r.has("segments")) s.segments = static_cast<int>(parse_long(r.get("segments"), "segments"));
    if (r.has("seasons")) s.seasons = static_cast<int>(parse_long(r.get("seasons"), "seasons"));
    if (r.has("samples")) s.samples = static_cast<int>(parse_long(r.get("samples"), "samples"));
    if (r.has("seed")) s.seed = static_cast<std::uint64_t>(parse_long(r.get("seed"), "seed"));
    if (r.has("noise_sd")) s.noise_sd = parse_double(r.get("noise_sd"), "noise_sd");
    if (r.has("sigma2")) s.sigma2 = parse_double(r.get("sigma2"), "sigma2");
    if (r.has("jump_season"))
      s.jump_season = static_cast<int>(parse_long(r.get("jump_season"), "jump_season"));
    if (r.has("jump_size")) s.jump_size = parse_double(r.get("jump_size"), "jump_size");
    if (r.has("alpha")) s.alpha = parse_double_list(r.get("alpha"), "alpha");
    if (r.has("prior_samples"))
      s.prior_samples = static_cast<int>(parse_long(r.get("prior_samples"), "prior_samples"));
    if (r.has("prior_lo")) s.prior_lo = parse_double(r.get("prior_lo"), "prior_lo");
    if (r.has("prior_hi")) s.prior_hi = parse_double(r.get("prior_hi"), "prior_hi");
    if (r.has("taxa_per_season"))
      s.taxa_per_season = static_cast<int>(parse_long(r.get("taxa_per_season"),
                                                      "taxa_per_season"));
    if (r.has("season_spacing"))
      s.season_spacing = parse_double(r.get("season_spacing"), "season_spacing");
    if (r.has("phi_min")) s.phi_min = parse_double(r.get("phi_min"), "phi_min");
    if (r.has("phi_max")) s.phi_max = parse_double(r.get("phi_max"), "phi_max");
    if (r.has("phi_groups"))
      s.phi_groups = static_cast<int>(parse_long(r.get("phi_groups"), "phi_groups"));
    r.finish();
  }

  return cfg;
}

void RunConfig::validate_for_fit() const {
  if (realizations_dir.empty()) throw ConfigError("paths.realizations_dir is required for fit");
  if (prior_file.empty()) throw ConfigError("paths.prior_file is required for fit");
  if (output_dir.empty()) throw ConfigError("paths.output_dir is required for fit");
  if (!std::filesystem::is_directory(realizations_dir))
    throw IoError("realizations_dir does not exist: " + realizations_dir.string());
  if (!std::filesystem::exists(prior_file))
    throw IoError("prior_file does not exist: " + prior_file.string());
  if (kde_exponent_sign != -1 && kde_exponent_sign != 1)
    throw ConfigError("kde.scott_exponent_sign must be -1 or 1");
  sampler.validate();
}

void RunConfig::validate_for_synthesize() const {
  if (!synth.present) throw ConfigError("a [synth] section is required for synthesize");
  if (output_dir.empty()) throw ConfigError("paths.output_dir is required for synthesize");
  if (synth.segments < 1 || synth.seasons < 1 || synth.samples < 1)
    throw ConfigError("synth shape values must be positive");
  if (synth.mode == "hierarchical") {
    if (!(synth.noise_sd > 0.0)) throw ConfigError("synth.noise_sd must be positive");
    if (!(synth.sigma2 > 0.0)) throw ConfigError("synth.sigma2 must be positive");
    if (synth.jump_season != 0 && (synth.jump_season < 2 || synth.jump_season > synth.seasons))
      throw ConfigError("synth.jump_season must lie in [2, seasons]");
    if (!synth.alpha.empty() && static_cast<int>(synth.alpha.size()) != synth.segments)
      throw ConfigError("synth.alpha must list one value per segment");
    if (synth.prior_samples < 2) throw ConfigError("synth.prior_samples must be >= 2");
    if (!(synth.prior_lo >= 0.0) || !(synth.prior_hi > synth.prior_lo))
      throw ConfigError("synth prior range invalid");
  } else {
    if (synth.taxa_per_season < 1) throw ConfigError("synth.taxa_per_season must be >= 1");
    if (!(synth.season_spacing > 0.0)) throw ConfigError("synth.season_spacing must be positive");
    PhiHyperprior h{synth.phi_min, synth.phi_max, synth.phi_groups};
    h.validate();
  }
}

void RunConfig::validate_for_report() const {
  if (output_dir.empty()) throw ConfigError("paths.output_dir is required for report");
  if (realizations_dir.empty())
    throw ConfigError("paths.realizations_dir is required for report");
  if (!(rho_threshold >= 0.0) || !(rho_threshold < 1.0))
    throw ConfigError("report.rho_threshold must lie in [0,1)");
}

}  // namespace dyirma
