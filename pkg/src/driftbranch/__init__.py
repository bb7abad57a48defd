"""Drift-and-branch particle population model: exact event-driven Monte Carlo
plus analytic threshold calculators and deterministic oracles."""

from .core import (
    Configuration,
    InitialStateSpec,
    WeightFunction,
    evaluate,
    sample_initial,
    shift,
)
from .intensities import Exponential, Gamma, Intensity, Tabulated, Uniform, intensity_from_json
from .kernels import (
    CycleKernel,
    Envelope,
    EnvelopeError,
    PhiProductKernel,
    ProductKernel,
    SamplerUnsupported,
    TabulatedKernel,
    beta_hat,
    fit_envelope,
    kernel_from_json,
    marginal_beta,
    product_gamma,
    sample_pair,
)
from .renewal import RenewalSolution, growth_rate, observed_order, solve, solve_checked
from .simulator import ModelParams, ReplicaEnsemble, Trajectory, run_ensemble, run_replica
from .soluble import SolubleState, evolve, moment_bound_check
from .thresholds import (
    ThresholdReport,
    build_report,
    compute_m1,
    compute_m_star,
    find_alpha,
    malthusian_rate,
)
from .validate import apply_generator_to_v, honesty_probe, lyapunov_suite, upsilon

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "CycleKernel",
    "Envelope",
    "EnvelopeError",
    "Exponential",
    "Gamma",
    "InitialStateSpec",
    "Intensity",
    "ModelParams",
    "PhiProductKernel",
    "ProductKernel",
    "RenewalSolution",
    "ReplicaEnsemble",
    "SamplerUnsupported",
    "SolubleState",
    "Tabulated",
    "TabulatedKernel",
    "ThresholdReport",
    "Trajectory",
    "Uniform",
    "WeightFunction",
    "apply_generator_to_v",
    "beta_hat",
    "build_report",
    "compute_m1",
    "compute_m_star",
    "evaluate",
    "evolve",
    "find_alpha",
    "fit_envelope",
    "growth_rate",
    "honesty_probe",
    "intensity_from_json",
    "kernel_from_json",
    "lyapunov_suite",
    "malthusian_rate",
    "marginal_beta",
    "moment_bound_check",
    "observed_order",
    "product_gamma",
    "run_ensemble",
    "run_replica",
    "sample_initial",
    "sample_pair",
    "shift",
    "solve",
    "solve_checked",
    "upsilon",
]
