"""Particle filtering and PMMH calibration for linear diffusions observed
through a marked Cox process."""

import json

from ._coxpf import (
    BornWolfPsf,
    ConfigError,
    Error,
    InvalidArgument,
    Model,
    ModelBuilder,
    benchmark_model,
    bridge_path_integral_expectation,
    choose_step_size,
    ess,
    fit_rmse_model,
    likelihood_no_obs,
    likelihood_two_obs,
    log_union_bound_marginal,
    neg_prob_bound_endpoint,
    neg_prob_bound_marginal,
    pmmh,
    poisson_estimates,
    run_cli,
    run_filter,
    simulate,
)


def build_model(block, **overrides):
    """Build a model from a config-style dict, e.g. {"preset": "microscopy"}."""
    return ModelBuilder(json.dumps(block)).build(overrides)


__all__ = [
    "BornWolfPsf",
    "ConfigError",
    "Error",
    "InvalidArgument",
    "Model",
    "ModelBuilder",
    "benchmark_model",
    "bridge_path_integral_expectation",
    "build_model",
    "choose_step_size",
    "ess",
    "fit_rmse_model",
    "likelihood_no_obs",
    "likelihood_two_obs",
    "log_union_bound_marginal",
    "neg_prob_bound_endpoint",
    "neg_prob_bound_marginal",
    "pmmh",
    "poisson_estimates",
    "run_cli",
    "run_filter",
    "simulate",
]
