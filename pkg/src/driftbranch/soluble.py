"""Closed-form oracle for the branch-free submodel: pure drift with edge loss.

For a Poisson state with intensity kappa0 the evolved intensity is exactly
kappa(t, x) = kappa0(x + t), so population moments reduce to tail integrals
of the initial intensity. This module works at that intensity level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .intensities import Intensity


@dataclass(frozen=True)
class SolubleState:
    """Intensity of the drifted state at time t: x -> base(x + t)."""

    base: Intensity
    t: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"time must be >= 0, got {self.t}")

    def density(self, x):
        return self.base.density(np.asarray(x, dtype=float) + self.t)

    def mass(self) -> float:
        """Expected population size; the tail of the initial intensity."""
        return float(self.base.tail(self.t))

    def tail(self, s):
        return self.base.tail(np.asarray(s, dtype=float) + self.t)

    def values_on_grid(self, xs):
        return self.density(np.asarray(xs, dtype=float))


def evolve(init, t: float) -> SolubleState:
    """Drift an intensity (or an already drifted state) by time t >= 0."""
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    if isinstance(init, SolubleState):
        return SolubleState(base=init.base, t=init.t + t)  # exact flow property
    return SolubleState(base=init, t=float(t))


def poisson_moment(mu: float, l: int) -> float:
    """l-th moment of the population size of a Poisson state with mean mu."""
    if l == 0:
        return 1.0
    if l == 1:
        return mu
    if l == 2:
        return mu + mu * mu
    raise ValueError(f"moment order l must be in {{0, 1, 2}}, got {l}")


def moment_bound_check(init: Intensity, t: float, l: int):
    """(N_l(t), N_l(0), pass) for a Poisson initial state; must never grow."""
    mu0 = float(init.mass())
    mut = evolve(init, t).mass()
    n_t = poisson_moment(mut, l)
    n_0 = poisson_moment(mu0, l)
    return n_t, n_0, n_t <= n_0


def l1_distance(init: Intensity, t: float, x_max: float = None, n: int = 20001) -> float:
    """Grid L1 distance between the drifted intensity and the initial one."""
    if x_max is None:
        x_max = float(init.support_upper(1e-10)) + t
    xs = np.linspace(0.0, x_max, n)
    diff = np.abs(evolve(init, t).density(xs) - init.density(xs))
    return float(np.trapezoid(diff, xs))
