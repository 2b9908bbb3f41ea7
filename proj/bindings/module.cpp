#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dyirma/analysis.hpp"
#include "dyirma/coalescent.hpp"
#include "dyirma/pipeline.hpp"

namespace py = pybind11;
using namespace dyirma;

PYBIND11_MODULE(_core, m) {
  m.doc() = "DyIRMA: recycle per-stratum MCMC realizations into a joint "
            "hierarchical posterior";

  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<IoError>(m, "IoError");
  py::register_exception<FormatError>(m, "FormatError");
  py::register_exception<ValidationError>(m, "ValidationError");
  py::register_exception<DomainError>(m, "DomainError");
  py::register_exception<NumericalError>(m, "NumericalError");
  py::register_exception<ConvergenceGateError>(m, "ConvergenceGateError");

  // ---- storage ------------------------------------------------------------
  py::class_<RealizationStore>(m, "RealizationStore")
      .def(py::init<>())
      .def_readwrite("data", &RealizationStore::data)
      .def_readwrite("segment_labels", &RealizationStore::segment_labels)
      .def_readwrite("season_labels", &RealizationStore::season_labels)
      .def_property_readonly("segments", &RealizationStore::segments)
      .def_property_readonly("seasons", &RealizationStore::seasons)
      .def_property_readonly("samples", &RealizationStore::samples)
      .def("validate", &RealizationStore::validate);

  py::class_<PriorSamples>(m, "PriorSamples")
      .def(py::init<>())
      .def_readwrite("data", &PriorSamples::data)
      .def_readwrite("season_labels", &PriorSamples::season_labels)
      .def_property_readonly("sample_count", &PriorSamples::sample_count)
      .def_property_readonly("seasons", &PriorSamples::seasons);

  m.def("load_realizations",
        py::overload_cast<const std::filesystem::path&, int>(&load_realizations),
        py::arg("directory"), py::arg("expected_seasons") = 0);
  m.def("load_prior_samples", &load_prior_samples, py::arg("path"),
        py::arg("expected_seasons") = 0);
  m.def("save_realization_file", &save_realization_file, py::arg("path"),
        py::arg("season_labels"), py::arg("values"));

  // ---- coalescent ----------------------------------------------------------
  py::class_<SamplingSchedule>(m, "SamplingSchedule")
      .def(py::init<>())
      .def_readwrite("sample_times", &SamplingSchedule::sample_times)
      .def_readwrite("season_of_taxon", &SamplingSchedule::season_of_taxon)
      .def_static("regular", &SamplingSchedule::regular, py::arg("count_per_season"),
                  py::arg("spacing"));

  py::class_<PhiHyperprior>(m, "PhiHyperprior")
      .def(py::init<>())
      .def_readwrite("phi_min", &PhiHyperprior::phi_min)
      .def_readwrite("phi_max", &PhiHyperprior::phi_max)
      .def_readwrite("groups", &PhiHyperprior::groups);

  m.def("sample_prior_tmrca", &sample_prior_tmrca, py::arg("schedule"), py::arg("hyper"),
        py::arg("draws"), py::arg("seed"));

  // ---- gamma KDE -----------------------------------------------------------
  py::class_<GammaKernelKde>(m, "GammaKernelKde")
      .def(py::init<Eigen::MatrixXd, double, std::optional<Eigen::VectorXd>>(),
           py::arg("points"), py::arg("epsilon"), py::arg("bandwidths") = std::nullopt)
      .def_property_readonly("bandwidths", &GammaKernelKde::bandwidths)
      .def_property_readonly("log_floor", &GammaKernelKde::log_floor)
      .def_property_readonly("box_min", &GammaKernelKde::box_min)
      .def_property_readonly("box_max", &GammaKernelKde::box_max)
      .def("log_density", &GammaKernelKde::log_density, py::arg("x"))
      .def("log_density_raw", &GammaKernelKde::log_density_raw, py::arg("x"));

  m.def("scott_bandwidths", &scott_bandwidths, py::arg("points"),
        py::arg("exponent_sign") = -1);
  m.def("fit_gamma_kde",
        py::overload_cast<const Eigen::MatrixXd&, double>(&fit_gamma_kde),
        py::arg("points"), py::arg("epsilon"));
  m.def("fit_gamma_kde", py::overload_cast<const Eigen::MatrixXd&>(&fit_gamma_kde),
        py::arg("points"));

  // ---- hierarchical model ---------------------------------------------------
  py::enum_<CovKind>(m, "CovKind")
      .value("IND", CovKind::IND)
      .value("CS", CovKind::CS)
      .value("UNS", CovKind::UNS)
      .value("AR1", CovKind::AR1)
      .value("TRI", CovKind::TRI);

  m.def("build_design",
        [](int seasons) { return build_design(seasons).rows; }, py::arg("seasons"));
  m.def("materialize_covariance",
        [](const std::string& kind, double sigma2, double rho,
           const std::vector<int>& perm, int segments,
           std::optional<Eigen::MatrixXd> matrix) {
          CovarianceSpec spec;
          spec.kind = cov_kind_from_name(kind);
          spec.sigma2 = sigma2;
          spec.rho = rho;
          if (matrix) spec.matrix = *matrix;
          return materialize_covariance(spec, perm, segments);
        },
        py::arg("kind"), py::arg("sigma2"), py::arg("rho"), py::arg("perm"),
        py::arg("segments"), py::arg("matrix") = std::nullopt);

  // ---- sampler ---------------------------------------------------------------
  py::class_<Hyperpriors>(m, "Hyperpriors")
      .def(py::init<>())
      .def_readwrite("mu_beta", &Hyperpriors::mu_beta)
      .def_readwrite("tau_beta", &Hyperpriors::tau_beta)
      .def_readwrite("p_inclusion", &Hyperpriors::p_inclusion)
      .def_readwrite("mu_alpha", &Hyperpriors::mu_alpha)
      .def_readwrite("tau_alpha", &Hyperpriors::tau_alpha)
      .def_readwrite("wishart_nu", &Hyperpriors::wishart_nu)
      .def_readwrite("wishart_r", &Hyperpriors::wishart_r)
      .def_readwrite("ig_shape", &Hyperpriors::ig_shape)
      .def_readwrite("ig_scale", &Hyperpriors::ig_scale)
      .def_readwrite("rho_a", &Hyperpriors::rho_a)
      .def_readwrite("rho_b", &Hyperpriors::rho_b);

  py::class_<SamplerConfig>(m, "SamplerConfig")
      .def(py::init<>())
      .def_readwrite("iterations", &SamplerConfig::iterations)
      .def_readwrite("burn_in_fraction", &SamplerConfig::burn_in_fraction)
      .def_readwrite("thinning", &SamplerConfig::thinning)
      .def_readwrite("chains", &SamplerConfig::chains)
      .def_readwrite("seed", &SamplerConfig::seed)
      .def_readwrite("hyper", &SamplerConfig::hyper)
      .def_readwrite("cov_kind", &SamplerConfig::cov_kind)
      .def_readwrite("permute", &SamplerConfig::permute)
      .def_readwrite("estimate_covariance", &SamplerConfig::estimate_covariance)
      .def_readwrite("init_sigma2", &SamplerConfig::init_sigma2)
      .def_readwrite("init_rho", &SamplerConfig::init_rho)
      .def_readwrite("mh_step_sigma2", &SamplerConfig::mh_step_sigma2)
      .def_readwrite("mh_step_rho", &SamplerConfig::mh_step_rho)
      .def("retained_draws", &SamplerConfig::retained_draws)
      .def("validate", &SamplerConfig::validate);

  py::class_<ChainTrace>(m, "ChainTrace")
      .def(py::init<>())
      .def_readonly("chain_id", &ChainTrace::chain_id)
      .def_readonly("cov_kind", &ChainTrace::cov_kind)
      .def_readonly("segments", &ChainTrace::segments)
      .def_readonly("seasons", &ChainTrace::seasons)
      .def_readonly("iterations", &ChainTrace::iterations)
      .def_readonly("alpha", &ChainTrace::alpha)
      .def_readonly("beta", &ChainTrace::beta)
      .def_readonly("gamma", &ChainTrace::gamma)
      .def_readonly("sigma2", &ChainTrace::sigma2)
      .def_readonly("rho", &ChainTrace::rho)
      .def_readonly("cov_matrix", &ChainTrace::cov_matrix)
      .def_readonly("perm", &ChainTrace::perm)
      .def_readonly("selected", &ChainTrace::selected)
      .def("__len__", &ChainTrace::size);

  m.def("run_chain", &run_chain, py::arg("config"), py::arg("store"), py::arg("kde"),
        py::call_guard<py::gil_scoped_release>());
  m.def("run_chains",
        [](const SamplerConfig& config, const RealizationStore& store,
           const GammaKernelKde& kde, int jobs) {
          py::gil_scoped_release release;
          return run_chains(config, store, kde, jobs);
        },
        py::arg("config"), py::arg("store"), py::arg("kde"), py::arg("jobs") = 0);
  m.def("save_trace", &save_trace, py::arg("trace"), py::arg("path"));
  m.def("load_trace", &load_trace, py::arg("path"),
        py::arg("kind_hint") = std::nullopt, py::arg("chain_id") = 0);

  // ---- analysis ---------------------------------------------------------------
  m.def("geweke_z", &geweke_z, py::arg("series"), py::arg("frac_a") = 0.1,
        py::arg("frac_b") = 0.5);
  m.def("rhat", &rhat, py::arg("chains"), py::arg("split") = false);
  m.def("bayes_factor", &bayes_factor, py::arg("posterior_odds"), py::arg("prior_odds"));
  m.def("model_posterior_prob",
        [](const std::vector<ChainTrace>& traces, const std::vector<int>& on_jumps,
           const std::string& restrict) {
          return model_posterior_prob(traces, on_jumps,
                                      restrict == "exact" ? PatternRestrict::Exact
                                                          : PatternRestrict::AtLeast);
        },
        py::arg("traces"), py::arg("on_jumps"), py::arg("restrict") = "exact");
  m.def("conditional_mean_beta",
        [](const std::vector<ChainTrace>& traces, int jump) {
          const auto s = conditional_mean_beta(traces, jump);
          return py::make_tuple(s.inclusion_prob, s.cond_mean, s.cond_bci);
        },
        py::arg("traces"), py::arg("jump"));
  m.def("absolute_timecourse", &absolute_timecourse, py::arg("traces"), py::arg("season"));
  m.def("neighbor_probability",
        [](const std::vector<ChainTrace>& traces, int a, int b, double threshold) {
          const auto np = neighbor_probability(traces, a, b, threshold);
          return py::make_tuple(np.conditional, np.rho_exceed_prob);
        },
        py::arg("traces"), py::arg("seg_a"), py::arg("seg_b"),
        py::arg("rho_threshold") = 0.2);
}
