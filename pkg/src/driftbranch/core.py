"""Finite particle configurations and the observables evaluated on them.

A configuration is a finite multiset of nonnegative traits (time left until
fission), stored sorted ascending so the next boundary hit is the first
element. Weighted size functionals and Poisson initial states live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .intensities import Intensity, intensity_from_json


class ConfigurationError(ValueError):
    """Invalid configuration or operation on one."""


@dataclass(frozen=True)
class Configuration:
    """Sorted, immutable multiset of traits >= 0. Duplicates are allowed."""

    traits: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        t = np.sort(np.asarray(self.traits, dtype=float).ravel())
        if t.size and (not np.all(np.isfinite(t)) or t[0] < 0):
            raise ConfigurationError("traits must be finite and >= 0")
        t.setflags(write=False)
        object.__setattr__(self, "traits", t)

    def __len__(self):
        return int(self.traits.size)

    def __iter__(self):
        return iter(self.traits)

    @property
    def min_trait(self) -> float:
        """Smallest trait, i.e. time to the next boundary hit."""
        if not len(self):
            raise ConfigurationError("empty configuration has no minimum trait")
        return float(self.traits[0])

    def to_json(self):
        return self.traits.tolist()

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj, dtype=float))


def shift(gamma: Configuration, t: float) -> Configuration:
    """Translate every trait by t; negative t requires all traits >= |t|."""
    if len(gamma) == 0:
        return gamma
    if t < 0 and gamma.min_trait < -t:
        raise ConfigurationError(
            f"shift by {t} would push the minimum trait {gamma.min_trait} below zero"
        )
    return Configuration(gamma.traits + t)


_WEIGHT_KINDS = ("h_m", "h_varsigma_alpha", "power_moment", "phi_sigma_product")

# engine recording codes, keep in sync with _engine._weight_value
_WCODE = {"h_m": 0, "h_varsigma_alpha": 1, "power_moment": 2, "phi_sigma_product": 3}


@dataclass(frozen=True)
class WeightFunction:
    """Tagged weight functional on configurations.

    h_m:               1 + m * |gamma|
    h_varsigma_alpha:  1 + varsigma * |gamma| + sum_x exp(-alpha x)
    power_moment:      |gamma| ** l
    phi_sigma_product: prod_x (1 + x) ** (-sigma)
    """

    kind: str
    m: float = 0.0
    varsigma: float = 0.0
    alpha: float = 0.0
    l: int = 0
    sigma: float = 3.0

    def __post_init__(self):
        if self.kind not in _WEIGHT_KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}; supported: {_WEIGHT_KINDS}")
        if self.kind == "h_m" and self.m < 0:
            raise ValueError("h_m needs m >= 0")
        if self.kind == "h_varsigma_alpha" and not (self.varsigma > 0 and self.alpha > 0):
            raise ValueError("h_varsigma_alpha needs varsigma > 0 and alpha > 0")
        if self.kind == "power_moment" and (self.l < 0 or self.l != int(self.l)):
            raise ValueError("power_moment needs integer l >= 0")
        if self.kind == "phi_sigma_product" and self.sigma < 3:
            raise ValueError("phi_sigma_product needs sigma >= 3")

    @property
    def label(self) -> str:
        if self.kind == "h_m":
            return f"h_m[m={self.m!r}]"
        if self.kind == "h_varsigma_alpha":
            return f"h[vs={self.varsigma!r};alpha={self.alpha!r}]"
        if self.kind == "power_moment":
            return f"moment[l={self.l}]"
        return f"phi_prod[sigma={self.sigma!r}]"

    def engine_params(self):
        """(code, p0, p1) triple consumed by the simulation engine."""
        code = _WCODE[self.kind]
        if self.kind == "h_m":
            return code, self.m, 0.0
        if self.kind == "h_varsigma_alpha":
            return code, self.varsigma, self.alpha
        if self.kind == "power_moment":
            return code, float(self.l), 0.0
        return code, self.sigma, 0.0

    def to_json(self):
        if self.kind == "h_m":
            return {"type": "h_m", "m": self.m}
        if self.kind == "h_varsigma_alpha":
            return {"type": "h_varsigma_alpha", "varsigma": self.varsigma, "alpha": self.alpha}
        if self.kind == "power_moment":
            return {"type": "power_moment", "l": self.l}
        return {"type": "phi_sigma_product", "sigma": self.sigma}

    @classmethod
    def from_json(cls, obj):
        kind = obj.get("type")
        if kind == "h_m":
            return cls("h_m", m=float(obj["m"]))
        if kind == "h_varsigma_alpha":
            return cls("h_varsigma_alpha", varsigma=float(obj["varsigma"]), alpha=float(obj["alpha"]))
        if kind == "power_moment":
            return cls("power_moment", l=int(obj["l"]))
        if kind == "phi_sigma_product":
            return cls("phi_sigma_product", sigma=float(obj["sigma"]))
        raise ValueError(f"unknown weight function type {kind!r}")


def evaluate(w: WeightFunction, gamma: Configuration) -> float:
    """Value of the weight functional on a configuration."""
    n = len(gamma)
    if w.kind == "h_m":
        return 1.0 + w.m * n
    if w.kind == "h_varsigma_alpha":
        return 1.0 + w.varsigma * n + float(np.sum(np.exp(-w.alpha * gamma.traits)))
    if w.kind == "power_moment":
        return float(n**w.l)
    return math.exp(-w.sigma * float(np.sum(np.log1p(gamma.traits))))


@dataclass(frozen=True)
class InitialStateSpec:
    """Either a Poisson state with a given intensity or a fixed configuration."""

    intensity: Optional[Intensity] = None
    fixed: Optional[Configuration] = None

    def __post_init__(self):
        if (self.intensity is None) == (self.fixed is None):
            raise ValueError("specify exactly one of intensity or fixed")
        if self.intensity is not None and not np.isfinite(self.intensity.mass()):
            raise ValueError("Poisson intensity must have finite integral")

    @property
    def mean_count(self) -> float:
        if self.fixed is not None:
            return float(len(self.fixed))
        return float(self.intensity.mass())

    def to_json(self):
        if self.fixed is not None:
            return {"type": "fixed", "traits": self.fixed.to_json()}
        return {"type": "poisson", "intensity": self.intensity.to_json()}

    @classmethod
    def from_json(cls, obj):
        kind = obj.get("type")
        if kind == "fixed":
            return cls(fixed=Configuration.from_json(obj["traits"]))
        if kind == "poisson":
            return cls(intensity=intensity_from_json(obj["intensity"]))
        raise ValueError(f"unknown initial state type {kind!r}")


def sample_initial(spec: InitialStateSpec, rng: np.random.Generator) -> Configuration:
    """Draw an initial configuration: Poisson count, i.i.d. traits."""
    if spec.fixed is not None:
        return spec.fixed
    n = int(rng.poisson(spec.intensity.mass()))
    if n == 0:
        return Configuration()
    return Configuration(spec.intensity.sample(rng, n))
