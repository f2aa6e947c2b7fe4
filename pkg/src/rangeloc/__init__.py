"""Range-based (TOA) localization: consistent first-step estimators, one-step
Gauss-Newton refinement, Fisher/CRLB baselines and a Monte-Carlo harness."""

__version__ = "0.1.0"

from .analysis import aggregate, fisher, theoretical_mse
from .estimators import (
    Estimate,
    Method,
    aw_bias_eli_lin,
    bias_eli,
    bias_eli_lin,
    estimate_variances,
    first_step,
    noise_est,
    noise_est_lin,
    sls,
    w_bias_eli_lin,
)
from .gtrs import GtrsInstance, solve_bias_eli
from .model import (
    MeasurementSet,
    NoiseModel,
    Scenario,
    build_design,
    reference_heterogeneous_scenario,
    reference_scenario,
    simulate,
    true_lift,
)
from .refine import gn_converge, gn_step, two_step

__all__ = [
    "Estimate", "GtrsInstance", "MeasurementSet", "Method", "NoiseModel", "Scenario",
    "aggregate", "aw_bias_eli_lin", "bias_eli", "bias_eli_lin", "build_design",
    "estimate_variances", "first_step", "fisher", "gn_converge", "gn_step", "noise_est",
    "noise_est_lin", "reference_heterogeneous_scenario", "reference_scenario", "simulate",
    "sls", "solve_bias_eli", "theoretical_mse", "true_lift", "two_step", "w_bias_eli_lin",
]
