"""Nonnegative integrable functions on [0, inf) from a small closed catalog.

An intensity is ``weight * pdf`` for an analytic pdf (exponential, uniform,
gamma) or a tabulated piecewise-linear function. The same objects double as
probability densities when ``weight == 1``; product cycle kernels and Poisson
initial states are both built from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special


class IntensityError(ValueError):
    """Invalid intensity specification."""


def _as_float(v, name):
    x = float(v)
    if not np.isfinite(x):
        raise IntensityError(f"{name} must be finite, got {v!r}")
    return x


@dataclass(frozen=True)
class Intensity:
    """Base class; subclasses implement the numeric surface."""

    weight: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.weight) or self.weight < 0:
            raise IntensityError(f"weight must be finite and >= 0, got {self.weight}")

    def density(self, x):
        """Pointwise value at x (array-friendly); zero for x < 0."""
        raise NotImplementedError

    def mass(self):
        """Total integral over [0, inf)."""
        raise NotImplementedError

    def tail(self, t):
        """Integral over [t, inf) (array-friendly in t)."""
        raise NotImplementedError

    def laplace(self, alpha):
        """Integral of density(x) * exp(-alpha x) over [0, inf)."""
        raise NotImplementedError

    def sample(self, rng, n):
        """Draw n points from the normalized density."""
        raise NotImplementedError

    def support_upper(self, eps=1e-8):
        """X such that the mass beyond X is <= eps * total mass."""
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(Intensity):
    """weight * rate * exp(-rate x)."""

    rate: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise IntensityError(f"rate must be > 0, got {self.rate}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.weight * self.rate * np.exp(-self.rate * x), 0.0)

    def mass(self):
        return self.weight

    def tail(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return self.weight * np.exp(-self.rate * t)

    def laplace(self, alpha):
        return self.weight * self.rate / (self.rate + alpha)

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, size=n)

    def support_upper(self, eps=1e-8):
        return -np.log(eps) / self.rate

    def to_json(self):
        return {"type": "exponential", "rate": self.rate, "weight": self.weight}


@dataclass(frozen=True)
class Uniform(Intensity):
    """weight / (hi - lo) on [lo, hi], zero elsewhere."""

    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (0 <= self.lo < self.hi < np.inf):
            raise IntensityError(f"need 0 <= lo < hi, got [{self.lo}, {self.hi}]")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        h = self.weight / (self.hi - self.lo)
        return np.where((x >= self.lo) & (x <= self.hi), h, 0.0)

    def mass(self):
        return self.weight

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        frac = np.clip((self.hi - t) / (self.hi - self.lo), 0.0, 1.0)
        return self.weight * frac

    def laplace(self, alpha):
        if alpha == 0:
            return self.weight
        width = self.hi - self.lo
        return self.weight * (np.exp(-alpha * self.lo) - np.exp(-alpha * self.hi)) / (alpha * width)

    def sample(self, rng, n):
        return rng.uniform(self.lo, self.hi, size=n)

    def support_upper(self, eps=1e-8):
        return self.hi

    def to_json(self):
        return {"type": "uniform", "lo": self.lo, "hi": self.hi, "weight": self.weight}


@dataclass(frozen=True)
class Gamma(Intensity):
    """weight * rate^shape x^(shape-1) exp(-rate x) / Gamma(shape)."""

    shape: float = 1.0
    rate: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if not (np.isfinite(self.shape) and self.shape > 0):
            raise IntensityError(f"shape must be > 0, got {self.shape}")
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise IntensityError(f"rate must be > 0, got {self.rate}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            logpdf = (
                self.shape * np.log(self.rate)
                + (self.shape - 1.0) * np.log(x)
                - self.rate * x
                - special.gammaln(self.shape)
            )
            val = np.exp(logpdf)
        if self.shape == 1.0:
            val = np.where(x == 0, self.rate, val)
        else:
            val = np.where(x == 0, np.inf if self.shape < 1 else 0.0, val)
        return self.weight * np.where(x >= 0, val, 0.0)

    def mass(self):
        return self.weight

    def tail(self, t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return self.weight * special.gammaincc(self.shape, self.rate * t)

    def laplace(self, alpha):
        return self.weight * (self.rate / (self.rate + alpha)) ** self.shape

    def sample(self, rng, n):
        return rng.gamma(self.shape, 1.0 / self.rate, size=n)

    def support_upper(self, eps=1e-8):
        # invert the regularized upper incomplete gamma
        return special.gammainccinv(self.shape, eps) / self.rate

    def to_json(self):
        return {"type": "gamma", "shape": self.shape, "rate": self.rate, "weight": self.weight}


@dataclass(frozen=True)
class Tabulated(Intensity):
    """Piecewise-linear interpolation of (x, y) knots; zero outside [x0, xN]."""

    x: np.ndarray = field(default=None)
    y: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or y.shape != x.shape or x.size < 2:
            raise IntensityError("tabulated intensity needs matching 1-d x, y with >= 2 knots")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise IntensityError("tabulated knots must be finite")
        if np.any(np.diff(x) <= 0) or x[0] < 0:
            raise IntensityError("x knots must be strictly increasing and >= 0")
        if np.any(y < 0):
            raise IntensityError("y values must be >= 0")
        x = x.copy()
        y = y.copy()
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        seg = 0.5 * (y[1:] + y[:-1]) * np.diff(x)  # exact for piecewise linear
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        cum.setflags(write=False)
        object.__setattr__(self, "_cum", cum)
        if cum[-1] <= 0:
            raise IntensityError("tabulated intensity must have positive total mass")
        # `weight` is fixed at 1; the table carries its own scale.
        object.__setattr__(self, "weight", 1.0)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.interp(x, self.x, self.y, left=0.0, right=0.0)

    def mass(self):
        return float(self._cum[-1])

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        # integral of the interpolant from t to the last knot, exact per segment
        j = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, self.x.size - 2)
        x0, x1 = self.x[j], self.x[j + 1]
        y0, y1 = self.y[j], self.y[j + 1]
        tc = np.clip(t, x0, x1)
        yt = y0 + (y1 - y0) * (tc - x0) / (x1 - x0)
        partial = 0.5 * (yt + y1) * (x1 - tc)
        rest = self._cum[-1] - self._cum[j + 1]
        out = np.where(t <= self.x[0], self._cum[-1], np.where(t >= self.x[-1], 0.0, partial + rest))
        return out if out.ndim else float(out)

    def laplace(self, alpha):
        if alpha == 0:
            return self.mass()
        x0, x1 = self.x[:-1], self.x[1:]
        y0, y1 = self.y[:-1], self.y[1:]
        h = x1 - x0
        s = (y1 - y0) / h
        e0, e1 = np.exp(-alpha * x0), np.exp(-alpha * x1)
        i0 = (e0 - e1) / alpha
        i1 = (-h * e1 + i0) / alpha
        return float(np.sum(y0 * i0 + s * i1))

    def sample(self, rng, n):
        u = rng.uniform(0.0, self._cum[-1], size=n)
        j = np.clip(np.searchsorted(self._cum, u, side="right") - 1, 0, self.x.size - 2)
        r = u - self._cum[j]
        x0, y0 = self.x[j], self.y[j]
        h = self.x[j + 1] - x0
        s = (self.y[j + 1] - y0) / h
        flat = np.abs(s) * h < 1e-14 * np.maximum(y0, 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lin = r / np.where(y0 > 0, y0, 1.0)
            disc = np.maximum(y0 * y0 + 2.0 * s * r, 0.0)
            t_quad = (np.sqrt(disc) - y0) / np.where(s != 0, s, 1.0)
        t = np.where(flat | (s == 0), t_lin, t_quad)
        return x0 + np.clip(t, 0.0, h)

    def support_upper(self, eps=1e-8):
        return float(self.x[-1])

    def to_json(self):
        return {"type": "tabulated", "x": self.x.tolist(), "y": self.y.tolist()}


_TYPES = {"exponential": Exponential, "uniform": Uniform, "gamma": Gamma, "tabulated": Tabulated}


def intensity_from_json(obj) -> Intensity:
    """Parse a tagged JSON object into a catalog intensity."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise IntensityError(f"intensity spec must be an object with a 'type' tag, got {obj!r}")
    kind = obj["type"]
    if kind == "exponential":
        return Exponential(rate=_as_float(obj.get("rate", 1.0), "rate"),
                           weight=_as_float(obj.get("weight", 1.0), "weight"))
    if kind == "uniform":
        return Uniform(lo=_as_float(obj.get("lo", 0.0), "lo"),
                       hi=_as_float(obj.get("hi", 1.0), "hi"),
                       weight=_as_float(obj.get("weight", 1.0), "weight"))
    if kind == "gamma":
        return Gamma(shape=_as_float(obj.get("shape", 1.0), "shape"),
                     rate=_as_float(obj.get("rate", 1.0), "rate"),
                     weight=_as_float(obj.get("weight", 1.0), "weight"))
    if kind == "tabulated":
        return Tabulated(x=obj["x"], y=obj["y"])
    raise IntensityError(f"unknown intensity type {kind!r}; supported: {sorted(_TYPES)}")
