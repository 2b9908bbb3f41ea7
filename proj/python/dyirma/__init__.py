"""Joint hierarchical re-analysis of stored per-stratum MCMC draws."""

from ._core import (
    ChainTrace,
    ConfigError,
    ConvergenceGateError,
    CovKind,
    DomainError,
    FormatError,
    GammaKernelKde,
    Hyperpriors,
    IoError,
    NumericalError,
    PhiHyperprior,
    PriorSamples,
    RealizationStore,
    SamplerConfig,
    SamplingSchedule,
    ValidationError,
    absolute_timecourse,
    bayes_factor,
    build_design,
    conditional_mean_beta,
    fit_gamma_kde,
    geweke_z,
    load_prior_samples,
    load_realizations,
    load_trace,
    materialize_covariance,
    model_posterior_prob,
    neighbor_probability,
    rhat,
    run_chain,
    run_chains,
    sample_prior_tmrca,
    save_realization_file,
    save_trace,
    scott_bandwidths,
)

__all__ = [name for name in dir() if not name.startswith("_")]
