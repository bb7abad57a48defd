"""Cycle kernels b(x, y): the joint density of the two progeny traits.

Internally kernels use the two-progeny normalization: the double integral of
b over the quadrant equals 2, so the marginal beta = int b(., y) dy carries
total mass 2 and the pair sampler draws from b / 2. Variants:

  product_gamma(k, a)   b = 2 p (x) p(y) with p a Gamma(k+1, rate a) density
  product(p)            b = 2 p (x) p(y) for any catalog density p
  phi_product(sigma)    b = c [phi_{s+1}(x) phi_s(y) + phi_s(x) phi_{s+1}(y)],
                        c = sigma (sigma - 1); saturates its own envelope
  tabulated(x, values)  symmetric bilinear table; no pair sampler
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .intensities import Exponential, Gamma, Intensity, Tabulated, Uniform, intensity_from_json


class KernelError(ValueError):
    """Invalid kernel specification."""


class SamplerUnsupported(KernelError):
    """Kernel has no exact pair sampler."""


class EnvelopeError(RuntimeError):
    """Envelope fit failed: bound violated or ratio growing in the tail."""


def phi(x, sigma):
    """Polynomial tail profile (1 + x) ** (-sigma)."""
    return (1.0 + np.asarray(x, dtype=float)) ** (-sigma)


def _normalized(p: Intensity) -> Intensity:
    m = p.mass()
    if not (np.isfinite(m) and m > 0):
        raise KernelError("progeny density must have positive finite mass")
    if m == 1.0:
        return p
    if isinstance(p, Tabulated):
        return Tabulated(x=p.x, y=np.asarray(p.y) / m)
    return dataclasses.replace(p, weight=p.weight / m)


class CycleKernel:
    """Common surface of all kernel variants."""

    def b(self, x, y):
        """Pointwise kernel value (array-friendly)."""
        raise NotImplementedError

    def marginal_beta(self, x):
        """beta(x) = int b(x, y) dy; total mass 2."""
        raise NotImplementedError

    def beta_tail(self, s):
        """int_s^inf beta(x) dx."""
        raise NotImplementedError

    def beta_hat(self, alpha):
        """Laplace transform of beta; beta_hat(0) = 2, decreasing to 0."""
        raise NotImplementedError

    def beta_sup(self):
        """Upper bound for sup beta, used to pick renewal grid steps."""
        raise NotImplementedError

    def sample_pairs(self, rng, n):
        """n progeny pairs distributed as b / 2, shape (n, 2)."""
        raise NotImplementedError

    def sample_pair(self, rng):
        x, y = self.sample_pairs(rng, 1)[0]
        return float(x), float(y)

    def support_upper(self, eps=1e-8):
        """X with beta mass beyond X below eps (absolute, out of 2)."""
        raise NotImplementedError

    def half_mass_quadrature(self):
        """(1/2) int int b by adaptive quadrature; should be 1."""
        raise NotImplementedError

    def engine_params(self):
        """(code, p0, p1, table_x, table_y) consumed by the event engine."""
        raise SamplerUnsupported(f"{type(self).__name__} has no event-engine sampler")

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ProductKernel(CycleKernel):
    """b(x, y) = 2 p(x) p(y) for a probability density p from the catalog."""

    p: Intensity

    def __post_init__(self):
        object.__setattr__(self, "p", _normalized(self.p))

    def b(self, x, y):
        return 2.0 * self.p.density(x) * self.p.density(y)

    def marginal_beta(self, x):
        return 2.0 * self.p.density(x)

    def beta_tail(self, s):
        return 2.0 * self.p.tail(s)

    def beta_hat(self, alpha):
        return 2.0 * self.p.laplace(alpha)

    def beta_sup(self):
        if isinstance(self.p, Exponential):
            return 2.0 * self.p.rate
        if isinstance(self.p, Uniform):
            return 2.0 / (self.p.hi - self.p.lo)
        if isinstance(self.p, Tabulated):
            return 2.0 * float(np.max(self.p.y))
        grid = np.linspace(0.0, self.p.support_upper(1e-6), 4097)
        return 2.0 * float(np.max(self.p.density(grid)))

    def sample_pairs(self, rng, n):
        return np.column_stack([self.p.sample(rng, n), self.p.sample(rng, n)])

    def support_upper(self, eps=1e-8):
        return self.p.support_upper(eps / 2.0)

    def half_mass_quadrature(self):
        ub = self.p.support_upper(1e-14)
        total, _ = integrate.quad(self.p.density, 0.0, ub, epsabs=1e-12, limit=400)
        total += float(self.p.tail(ub))  # analytic remainder beyond the quadrature box
        return total * total

    def engine_params(self):
        empty = np.empty(0)
        if isinstance(self.p, Gamma):
            return 0, float(self.p.shape), float(self.p.rate), empty, empty
        if isinstance(self.p, Uniform):
            return 1, float(self.p.lo), float(self.p.hi), empty, empty
        if isinstance(self.p, Exponential):
            return 2, float(self.p.rate), 0.0, empty, empty
        if isinstance(self.p, Tabulated):
            return 3, 0.0, 0.0, np.asarray(self.p.x, dtype=float), np.asarray(self.p.y, dtype=float)
        raise SamplerUnsupported(f"no engine sampler for density {type(self.p).__name__}")

    def to_json(self):
        if isinstance(self.p, Gamma) and float(self.p.shape).is_integer():
            return {"type": "product_gamma", "k": int(self.p.shape) - 1, "a": self.p.rate}
        return {"type": "product", "p": self.p.to_json()}


def product_gamma(k: int, a: float) -> ProductKernel:
    """Gamma-density product kernel; beta_hat(alpha) = 2 (a / (a + alpha))^(k+1)."""
    if k != int(k) or k < 0:
        raise KernelError(f"k must be an integer >= 0, got {k}")
    if not a > 0:
        raise KernelError(f"a must be > 0, got {a}")
    return ProductKernel(Gamma(shape=float(k) + 1.0, rate=float(a)))


@dataclass(frozen=True)
class PhiProductKernel(CycleKernel):
    """Symmetrized product of the polynomial profiles; saturates its envelope.

    The normalization constant sigma (sigma - 1) makes the half mass exactly 1.
    """

    sigma_shape: float = 3.0

    def __post_init__(self):
        if not self.sigma_shape > 2:
            raise KernelError("phi_product needs sigma > 2 for integrability")

    @property
    def c(self):
        return self.sigma_shape * (self.sigma_shape - 1.0)

    def b(self, x, y):
        s = self.sigma_shape
        return self.c * (phi(x, s + 1) * phi(y, s) + phi(x, s) * phi(y, s + 1))

    def marginal_beta(self, x):
        s = self.sigma_shape
        return s * phi(x, s + 1) + (s - 1.0) * phi(x, s)

    def beta_tail(self, t):
        s = self.sigma_shape
        t = np.asarray(t, dtype=float)
        return phi(t, s) + phi(t, s - 1.0)

    def beta_hat(self, alpha):
        if alpha == 0:
            return 2.0
        val, _ = integrate.quad(
            lambda x: self.marginal_beta(x) * np.exp(-alpha * x), 0.0, np.inf, limit=400
        )
        return float(val)

    def beta_sup(self):
        return float(self.marginal_beta(0.0))

    def sample_pairs(self, rng, n):
        s = self.sigma_shape
        # each side of the symmetrized product is a normalized Lomax density
        u = rng.random((n, 2))
        a = (1.0 - u[:, 0]) ** (-1.0 / s) - 1.0          # density s phi_{s+1}
        b = (1.0 - u[:, 1]) ** (-1.0 / (s - 1.0)) - 1.0  # density (s-1) phi_s
        swap = rng.random(n) < 0.5
        x = np.where(swap, b, a)
        y = np.where(swap, a, b)
        return np.column_stack([x, y])

    def support_upper(self, eps=1e-8):
        # beta tail ~ (1 + X)^(1 - sigma) dominates
        return (2.0 / eps) ** (1.0 / (self.sigma_shape - 1.0)) - 1.0

    def half_mass_quadrature(self):
        s = self.sigma_shape
        i_hi, _ = integrate.quad(lambda x: phi(x, s + 1), 0.0, np.inf, limit=400)
        i_lo, _ = integrate.quad(lambda x: phi(x, s), 0.0, np.inf, limit=400)
        return self.c * i_hi * i_lo

    def engine_params(self):
        empty = np.empty(0)
        return 10, float(self.sigma_shape), 0.0, empty, empty

    def to_json(self):
        return {"type": "phi_product", "sigma": self.sigma_shape}


@dataclass(frozen=True)
class TabulatedKernel(CycleKernel):
    """Symmetric kernel given on a grid, interpolated bilinearly, zero outside."""

    x: np.ndarray = field(default=None)
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0) or x[0] < 0:
            raise KernelError("grid must be 1-d, strictly increasing, >= 0")
        if v.shape != (x.size, x.size):
            raise KernelError("values must be a square matrix matching the grid")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise KernelError("values must be finite and >= 0")
        if not np.allclose(v, v.T, rtol=0, atol=1e-12 * max(1.0, float(np.max(v)))):
            raise KernelError("tabulated kernel must be symmetric")
        x = x.copy()
        v = v.copy()
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)
        row = np.trapezoid(v, x, axis=1)  # exact marginal on the grid
        object.__setattr__(self, "_marginal", Tabulated(x=x, y=row))
        interp = RegularGridInterpolator((x, x), v, bounds_error=False, fill_value=0.0)
        object.__setattr__(self, "_interp", interp)

    def b(self, x, y):
        scalar = np.ndim(x) == 0 and np.ndim(y) == 0
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
        out = self._interp(pts)
        return float(out[0]) if scalar else out

    def marginal_beta(self, x):
        return self._marginal.density(x)

    def beta_tail(self, s):
        return self._marginal.tail(s)

    def beta_hat(self, alpha):
        return self._marginal.laplace(alpha)

    def beta_sup(self):
        return float(np.max(self._marginal.y))

    def sample_pairs(self, rng, n):
        raise SamplerUnsupported("tabulated kernels do not provide a pair sampler")

    def support_upper(self, eps=1e-8):
        return float(self.x[-1])

    def half_mass_quadrature(self):
        return 0.5 * float(np.trapezoid(self._marginal.y, self.x))

    def to_json(self):
        return {"type": "tabulated", "x": self.x.tolist(), "values": self.values.tolist()}


def kernel_from_json(obj) -> CycleKernel:
    """Parse a tagged JSON object into a kernel."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise KernelError(f"kernel spec must be an object with a 'type' tag, got {obj!r}")
    kind = obj["type"]
    if kind == "product_gamma":
        return product_gamma(int(obj["k"]), float(obj["a"]))
    if kind == "product":
        return ProductKernel(intensity_from_json(obj["p"]))
    if kind == "phi_product":
        return PhiProductKernel(float(obj["sigma"]))
    if kind == "tabulated":
        return TabulatedKernel(x=obj["x"], values=obj["values"])
    raise KernelError(
        f"unknown kernel type {kind!r}; supported: product_gamma, product, phi_product, tabulated"
    )


# thin functional aliases matching the operation names used elsewhere
def marginal_beta(kernel: CycleKernel, x):
    return kernel.marginal_beta(x)


def beta_hat(kernel: CycleKernel, alpha):
    return kernel.beta_hat(alpha)


def sample_pair(kernel: CycleKernel, rng):
    return kernel.sample_pair(rng)


@dataclass(frozen=True)
class Envelope:
    """Certified bound b <= b_star [phi_{s+1}(x) phi_s(y) + phi_s(x) phi_{s+1}(y)]."""

    sigma: float
    b_star: float
    worst_point: tuple
    residual: float  # max of b - envelope over the verification grid, <= 0

    def bound(self, x, y):
        s = self.sigma
        return self.b_star * (phi(x, s + 1) * phi(y, s) + phi(x, s) * phi(y, s + 1))

    def to_json(self):
        return {
            "sigma": self.sigma,
            "b_star": self.b_star,
            "worst_point": list(self.worst_point),
            "residual": self.residual,
        }


def _envelope_shape(x, y, sigma):
    return phi(x, sigma + 1) * phi(y, sigma) + phi(x, sigma) * phi(y, sigma + 1)


def _ratio_on_grid(kernel, g, sigma):
    gx, gy = np.meshgrid(g, g, indexing="ij")
    return kernel.b(gx, gy) / _envelope_shape(gx, gy, sigma)


def _grid(x_max, n):
    lo = max(x_max * 1e-5, 1e-9)
    return np.concatenate([[0.0], np.geomspace(lo, x_max, n - 1)])


_GOLD = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_max(f, lo, hi, iters=60):
    a, b = lo, hi
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = f(d)
        else:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = f(c)
    xs = [a, b, c, d]
    fs = [f(a), f(b), fc, fd]
    i = int(np.argmax(fs))
    return xs[i], fs[i]


def fit_envelope(kernel: CycleKernel, sigma: float, coarse_n: int = 160) -> Envelope:
    """Smallest b_star (plus 1% headroom) certifying the polynomial envelope.

    Sup-search on a log grid, coordinate golden-section refinement around the
    worst point, re-verification on a 10x finer grid, and a tail-growth probe
    beyond the grid that rejects sigma values too small for the kernel.
    """
    if sigma < 3:
        raise KernelError(f"envelope requires sigma >= 3, got {sigma}")
    x_max = float(kernel.support_upper(1e-8))
    g = _grid(x_max, coarse_n)
    ratio = _ratio_on_grid(kernel, g, sigma)
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    best = float(ratio[i, j])
    bx, by = float(g[i]), float(g[j])

    def ratio_at(x, y):
        return float(kernel.b(x, y) / _envelope_shape(x, y, sigma))

    # refine within the neighboring cells, one coordinate at a time
    for _ in range(4):
        lo = g[max(i - 1, 0)]
        hi = g[min(i + 1, g.size - 1)]
        bx, _val = _golden_max(lambda x: ratio_at(x, by), lo, hi)
        lo = g[max(j - 1, 0)]
        hi = g[min(j + 1, g.size - 1)]
        by, val = _golden_max(lambda y: ratio_at(bx, y), lo, hi)
        if val <= best * (1 + 1e-12):
            best = max(best, val)
            break
        best = val

    # tail probe: a ratio still growing past the grid means sigma is too small
    ext = np.geomspace(x_max, 4.0 * x_max, 24)
    ext_ratio = float(np.max(_ratio_on_grid(kernel, ext, sigma)))
    if ext_ratio > best * (1.0 + 1e-9):
        raise EnvelopeError(
            f"kernel/envelope ratio keeps growing beyond x = {x_max:.3g} "
            f"({ext_ratio:.3g} > {best:.3g}); sigma = {sigma} is too small for this kernel"
        )

    b_star = best * 1.01
    fine = _grid(x_max, 10 * coarse_n)
    fx, fy = np.meshgrid(fine, fine, indexing="ij")
    gap = kernel.b(fx, fy) - b_star * _envelope_shape(fx, fy, sigma)
    residual = float(np.max(gap))
    if residual > 0:
        k, l = np.unravel_index(int(np.argmax(gap)), gap.shape)
        raise EnvelopeError(
            f"envelope violated on the verification grid at ({fine[k]:.6g}, {fine[l]:.6g}); "
            "increase the search grid density"
        )
    return Envelope(sigma=float(sigma), b_star=float(b_star), worst_point=(bx, by), residual=residual)
