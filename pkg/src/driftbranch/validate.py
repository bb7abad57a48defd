"""Executable checks of the analytic machinery: Lyapunov drift negativity,
the transform sign functional, and Monte Carlo honesty evidence.

The Lyapunov weight is v(gamma) = |gamma|! prod_x (1 + x)^(-sigma). Applying
the drift + death + branching generator to v and factoring out v itself leaves
an O(1) bracket, so the sign is immune to the factorial blow-up; the returned
value is reassembled from the bracket and the log of the prefactor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln

from .core import Configuration, InitialStateSpec, WeightFunction, evaluate
from .kernels import CycleKernel
from .simulator import ModelParams, run_ensemble
from .thresholds import ThresholdReport, build_report


@dataclass(frozen=True)
class LyapunovFunction:
    """v(gamma) = |gamma|! prod_x (1 + x)^(-sigma), sigma >= 3."""

    sigma: float = 3.0

    def __post_init__(self):
        if self.sigma < 3:
            raise ValueError(f"sigma must be >= 3, got {self.sigma}")

    def log_value(self, gamma: Configuration) -> float:
        n = len(gamma)
        return float(gammaln(n + 1) - self.sigma * np.sum(np.log1p(gamma.traits)))

    def value(self, gamma: Configuration) -> float:
        return float(np.exp(self.log_value(gamma)))


def apply_generator_to_v(
    gamma: Configuration, sigma: float, m: float, kernel: CycleKernel
) -> float:
    """Generator applied to the Lyapunov weight, evaluated exactly.

    Assembled as v(gamma) * bracket with

      bracket = -sigma sum_x 1/(1+x)  -  m |gamma|
                + (1/|gamma|) sum_{pairs} b(x, y) (1+x)^sigma (1+y)^sigma
                + (|gamma| + 1) m / (sigma - 1).

    The empty configuration is defined to give 0: with no particles there is
    no drift or branching to balance and the bound holds vacuously.
    """
    if sigma < 3:
        raise ValueError(f"sigma must be >= 3, got {sigma}")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    n = len(gamma)
    if n == 0:
        return 0.0
    x = gamma.traits
    r = 1.0 / (1.0 + x)
    bracket = -sigma * float(np.sum(r)) - m * n + (n + 1.0) * m / (sigma - 1.0)
    if n >= 2:
        q = (1.0 + x) ** sigma
        bmat = kernel.b(x[:, None], x[None, :]) * q[:, None] * q[None, :]
        iu = np.triu_indices(n, k=1)
        bracket += float(np.sum(bmat[iu])) / n
    if bracket == 0.0:
        return 0.0
    log_pref = float(gammaln(n + 1) - sigma * np.sum(np.log1p(x)))
    with np.errstate(over="ignore"):
        return float(np.sign(bracket) * np.exp(log_pref + np.log(abs(bracket))))


def upsilon(varsigma: float, alpha: float, kernel: CycleKernel) -> float:
    """Sign functional varsigma - 1 + beta_hat(alpha); <= 0 certifies the
    weighted-size bound."""
    if varsigma <= 0 or alpha < 0:
        raise ValueError("need varsigma > 0 and alpha >= 0")
    return varsigma - 1.0 + float(kernel.beta_hat(alpha))


def random_configurations(rng, count: int, max_size: int = 20, trait_rate: float = 1.0):
    """Sampler used by the drift property checks: size uniform on 0..max_size,
    traits i.i.d. exponential."""
    for _ in range(count):
        n = int(rng.integers(0, max_size + 1))
        yield Configuration(rng.exponential(1.0 / trait_rate, size=n))


@dataclass(frozen=True)
class LyapunovSuiteResult:
    n_configs: int
    n_violations: int
    fraction_violating: float
    worst_value: float

    def to_json(self):
        return {
            "n_configs": self.n_configs,
            "n_violations": self.n_violations,
            "fraction_violating": self.fraction_violating,
            "worst_value": self.worst_value,
        }


def lyapunov_suite(
    kernel: CycleKernel,
    sigma: float,
    m: float,
    n_configs: int = 10_000,
    seed: int = 0,
    max_size: int = 20,
) -> LyapunovSuiteResult:
    """Evaluate the drift sign on random configurations; violations are data."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    violations = 0
    for gamma in random_configurations(rng, n_configs, max_size=max_size):
        val = apply_generator_to_v(gamma, sigma, m, kernel)
        worst = max(worst, val)
        if val > 0:
            violations += 1
    return LyapunovSuiteResult(
        n_configs=n_configs,
        n_violations=violations,
        fraction_violating=violations / n_configs,
        worst_value=worst,
    )


def initial_weight_value(init: InitialStateSpec, w: WeightFunction) -> float:
    """Expected weight of the initial state (exact for Poisson states)."""
    if init.fixed is not None:
        return evaluate(w, init.fixed)
    kap = init.intensity
    if w.kind == "h_m":
        return 1.0 + w.m * kap.mass()
    if w.kind == "h_varsigma_alpha":
        return 1.0 + w.varsigma * kap.mass() + float(kap.laplace(w.alpha))
    raise ValueError(f"no closed-form initial value for weight kind {w.kind!r}")


@dataclass(frozen=True)
class HonestyReport:
    """Monte Carlo evidence: finiteness accounting and the weighted-size bound."""

    thresholds: ThresholdReport
    times: np.ndarray
    capped_fraction: np.ndarray
    extinct_fraction: np.ndarray
    live_fraction: np.ndarray
    accounting_exact: bool
    bound_applicable: bool  # m >= max{m1, alpha}
    h_initial: float
    h_mean: np.ndarray
    h_se: np.ndarray
    h_bound_ok: Optional[bool]

    def to_json(self):
        return {
            "thresholds": self.thresholds.to_json(),
            "times": self.times.tolist(),
            "capped_fraction": self.capped_fraction.tolist(),
            "extinct_fraction": self.extinct_fraction.tolist(),
            "live_fraction": self.live_fraction.tolist(),
            "accounting_exact": self.accounting_exact,
            "bound_applicable": self.bound_applicable,
            "h_initial": self.h_initial,
            "h_mean": self.h_mean.tolist(),
            "h_se": self.h_se.tolist(),
            "h_bound_ok": self.h_bound_ok,
        }


def honesty_probe(
    params: ModelParams,
    init: InitialStateSpec,
    n_replicas: int,
    base_seed: int,
    sigma: float = 3.0,
    target: float = 0.5,
    jobs: int = 1,
) -> HonestyReport:
    """Run an ensemble and report finiteness plus the weighted-size bound."""
    report = build_report(params.kernel, sigma=sigma, target=target)
    w = WeightFunction("h_varsigma_alpha", varsigma=report.varsigma, alpha=report.alpha)
    weights = params.weights if any(
        x.kind == "h_varsigma_alpha" and x.varsigma == w.varsigma and x.alpha == w.alpha
        for x in params.weights
    ) else params.weights + (w,)
    run_params = ModelParams(
        kernel=params.kernel,
        m=params.m,
        horizon=params.horizon,
        n_max=params.n_max,
        record_grid=params.record_grid,
        branching=params.branching,
        weights=weights,
    )
    ens = run_ensemble(run_params, init, n_replicas, base_seed, jobs=jobs)
    summ = ens.summary()
    wi = list(weights).index(w) if w in weights else len(weights) - 1
    h_initial = initial_weight_value(init, w)
    accounting = bool(
        np.all(summ.capped_fraction + summ.extinct_fraction + summ.live_fraction == 1.0)
    )
    applicable = params.m >= report.m2_alt
    h_mean = summ.mean_h[wi]
    h_se = summ.se_h[wi]
    bound_ok = None
    if applicable:
        bound_ok = bool(np.all(h_mean <= h_initial + 3.0 * h_se))
    return HonestyReport(
        thresholds=report,
        times=summ.times,
        capped_fraction=summ.capped_fraction,
        extinct_fraction=summ.extinct_fraction,
        live_fraction=summ.live_fraction,
        accounting_exact=accounting,
        bound_applicable=applicable,
        h_initial=h_initial,
        h_mean=h_mean,
        h_se=h_se,
        h_bound_ok=bound_ok,
    )
