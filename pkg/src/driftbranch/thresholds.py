"""Mortality thresholds computed from a cycle kernel.

Three levels of guarantee, from sharp to conservative:

  m_star   root of beta_hat(m) = 1; the exact boundary for boundedness of the
           mean population size (from the first-moment renewal equation).
  m1       drift bound max{0, (sigma-1)/(2 sigma-5) (b*/2 - sigma)} from the
           envelope constants; honesty certificate level.
  m2       combination of m1 with an alpha satisfying beta_hat(alpha) < 1.
           The source formula prints min{m1, alpha} while the accompanying
           statement requires m2 >= m1; both readings are reported and the
           conservative max{m1, alpha} is what downstream checks use.
"""

from __future__ import annotations

from dataclasses import dataclass

from .kernels import CycleKernel, Envelope, fit_envelope

_ROOT_TOL = 1e-8


def compute_m1(sigma: float, b_star: float) -> float:
    """Envelope-based mortality bound; zero whenever b_star <= 2 sigma."""
    if sigma < 3:
        raise ValueError(f"m1 formula requires sigma >= 3, got {sigma}")
    if b_star <= 0:
        raise ValueError(f"b_star must be > 0, got {b_star}")
    return max(0.0, (sigma - 1.0) / (2.0 * sigma - 5.0) * (b_star / 2.0 - sigma))


def _bisect_decreasing(f, target, tol=_ROOT_TOL):
    """Root of f(x) = target for continuous strictly decreasing f, f(0) > target."""
    lo, hi = 0.0, 1.0
    while f(hi) > target:
        lo = hi
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket the root; transform does not decay")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_alpha(kernel: CycleKernel, target: float):
    """alpha with beta_hat(alpha) = target in (0, 1), and varsigma = 1 - target."""
    if not 0.0 < target < 1.0:
        raise ValueError(f"target must lie in (0, 1), got {target}")
    alpha = _bisect_decreasing(kernel.beta_hat, target)
    return alpha, 1.0 - target


def compute_m_star(kernel: CycleKernel) -> float:
    """Sharp mean-criticality threshold: the root of beta_hat(m) = 1."""
    return _bisect_decreasing(kernel.beta_hat, 1.0)


def malthusian_rate(kernel: CycleKernel, m: float) -> float:
    """Exponent lam solving beta_hat(m + lam) = 1; equals m_star - m here
    because the constant death rate only shifts the transform argument."""
    return compute_m_star(kernel) - m


@dataclass(frozen=True)
class ThresholdReport:
    """All kernel-derived constants in one place."""

    sigma: float
    b_star: float
    m1: float
    alpha: float
    varsigma: float
    m2: float        # literal reading min{m1, alpha}
    m2_alt: float    # consistent reading max{m1, alpha}, used downstream
    m_star: float
    beta_hat_at_alpha: float
    m2_below_m1: bool
    envelope: Envelope

    def to_json(self):
        return {
            "sigma": self.sigma,
            "b_star": self.b_star,
            "m1": self.m1,
            "alpha": self.alpha,
            "varsigma": self.varsigma,
            "m2": self.m2,
            "m2_alt": self.m2_alt,
            "m_star": self.m_star,
            "beta_hat_at_alpha": self.beta_hat_at_alpha,
            "m2_below_m1": self.m2_below_m1,
            "envelope": self.envelope.to_json(),
        }

    def to_table(self) -> str:
        rows = [
            ("sigma", self.sigma),
            ("b_star", self.b_star),
            ("m1", self.m1),
            ("alpha", self.alpha),
            ("varsigma", self.varsigma),
            ("m2 (min reading)", self.m2),
            ("m2 (max reading)", self.m2_alt),
            ("m_star", self.m_star),
            ("beta_hat(alpha)", self.beta_hat_at_alpha),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [f"{name:<{width}}  {value!r}" for name, value in rows]
        if self.m2_below_m1:
            lines.append("note: min{m1, alpha} < m1; the min reading contradicts m2 >= m1")
        return "\n".join(lines)


def build_report(kernel: CycleKernel, sigma: float = 3.0, target: float = 0.5) -> ThresholdReport:
    """Assemble envelope fit, m1, alpha/varsigma and m_star for a kernel."""
    env = fit_envelope(kernel, sigma)
    m1 = compute_m1(env.sigma, env.b_star)
    alpha, varsigma = find_alpha(kernel, target)
    m_star = compute_m_star(kernel)
    m2 = min(m1, alpha)
    return ThresholdReport(
        sigma=env.sigma,
        b_star=env.b_star,
        m1=m1,
        alpha=alpha,
        varsigma=varsigma,
        m2=m2,
        m2_alt=max(m1, alpha),
        m_star=m_star,
        beta_hat_at_alpha=target,
        m2_below_m1=m2 < m1,
        envelope=env,
    )


def sigma_scan(kernel: CycleKernel, sigmas=None):
    """Coarse scan of (sigma, b_star, m1); returns the list sorted by m1."""
    if sigmas is None:
        sigmas = [3.0 + 0.5 * i for i in range(11)]
    out = []
    for s in sigmas:
        env = fit_envelope(kernel, s)
        out.append((s, env.b_star, compute_m1(s, env.b_star)))
    return sorted(out, key=lambda row: row[2])
