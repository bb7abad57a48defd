import math

import numpy as np
import pytest

from driftbranch.core import Configuration, InitialStateSpec, WeightFunction
from driftbranch.intensities import Exponential
from driftbranch.kernels import PhiProductKernel, product_gamma
from driftbranch.simulator import ModelParams
from driftbranch.thresholds import build_report
from driftbranch.validate import (
    LyapunovFunction,
    apply_generator_to_v,
    honesty_probe,
    initial_weight_value,
    lyapunov_suite,
    random_configurations,
    upsilon,
)

K01 = product_gamma(0, 1.0)


def brute_generator_on_v(gamma, sigma, m, kernel):
    """Direct factorial evaluation of the three generator pieces (small sizes)."""
    xs = list(gamma.traits)
    n = len(xs)
    if n == 0:
        return 0.0

    def phi(x, s):
        return (1.0 + x) ** (-s)

    prod_all = math.prod(phi(x, sigma) for x in xs)
    drift = -sigma * math.factorial(n) * sum(
        phi(x, sigma + 1) * math.prod(phi(y, sigma) for j, y in enumerate(xs) if j != i)
        for i, x in enumerate(xs)
    )
    death_loss = -m * n * math.factorial(n) * prod_all
    split_gain = math.factorial(n - 1) * sum(
        float(kernel.b(xs[i], xs[j]))
        * math.prod(phi(z, sigma) for k, z in enumerate(xs) if k not in (i, j))
        for i in range(n)
        for j in range(i + 1, n)
    )
    death_gain = math.factorial(n + 1) * (m / (sigma - 1.0)) * prod_all
    return drift + death_loss + split_gain + death_gain


def test_empty_configuration_gives_zero():
    assert apply_generator_to_v(Configuration(), 3.0, 5.0, K01) == 0.0


def test_singleton_closed_form():
    # value = -sigma phi_{sigma+1}(x) - m (sigma-3)/(sigma-1) phi_sigma(x)
    for sigma, m, x in [(3.0, 2.0, 0.7), (4.0, 1.0, 2.0), (3.5, 0.0, 0.0)]:
        got = apply_generator_to_v(Configuration([x]), sigma, m, K01)
        want = -sigma * (1 + x) ** (-(sigma + 1)) - m * (sigma - 3) / (sigma - 1) * (1 + x) ** (-sigma)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-15)
    # at sigma = 3 the death terms cancel exactly
    got = apply_generator_to_v(Configuration([1.0]), 3.0, 10.0, K01)
    assert got == pytest.approx(-3.0 * 2.0**-4, rel=1e-12)


def test_matches_bruteforce_on_random_configurations():
    rng = np.random.default_rng(88)
    for kernel in (K01, product_gamma(1, 1.0), PhiProductKernel(4.0)):
        for gamma in random_configurations(rng, 60, max_size=8):
            for m in (0.0, 1.7):
                got = apply_generator_to_v(gamma, 3.5, m, kernel)
                want = brute_generator_on_v(gamma, 3.5, m, kernel)
                assert got == pytest.approx(want, rel=1e-9, abs=1e-12)


def test_large_configuration_no_overflow():
    # factorial of 300 overflows double precision; the sign must still be right
    rng = np.random.default_rng(3)
    gamma = Configuration(rng.exponential(1.0, size=300))
    rep = build_report(K01, sigma=3.0, target=0.5)
    val = apply_generator_to_v(gamma, 3.0, rep.m1 + 0.01, K01)
    assert val <= 0.0  # may be -inf; never nan, never positive
    assert not np.isnan(val)


def test_drift_negative_at_m1_for_catalog_kernels():
    for kernel in (K01, product_gamma(1, 1.0)):
        rep = build_report(kernel, sigma=3.0, target=0.5)
        suite = lyapunov_suite(kernel, 3.0, rep.m1 + 1e-9, n_configs=2000, seed=5)
        assert suite.n_violations == 0
        assert suite.worst_value <= 0.0


def test_sharpness_probe_saturating_kernel():
    # the envelope-shaped kernel violates the drift bound below (and even at)
    # the certified mortality when the bound's grouping is saturated
    k = PhiProductKernel(4.0)
    suite = lyapunov_suite(k, 4.0, 0.0, n_configs=2000, seed=6)
    assert suite.fraction_violating > 0.1
    # two particles at the edge, m at the certified level: the drift is +4
    # (drift -24, split gain +24, death influx +4), so the bound is not sharp
    assert apply_generator_to_v(Configuration([0.0, 0.0]), 4.0, 2.0, k) == pytest.approx(4.0, rel=1e-9)


def test_lyapunov_function_values():
    v = LyapunovFunction(sigma=3.0)
    assert v.value(Configuration()) == 1.0
    assert v.value(Configuration([1.0])) == pytest.approx(0.125)
    assert v.value(Configuration([1.0, 1.0])) == pytest.approx(2.0 * 0.125 * 0.125)
    with pytest.raises(ValueError):
        LyapunovFunction(sigma=2.0)


def test_upsilon_values():
    alpha = 3.0
    vs = 1.0 - K01.beta_hat(alpha)
    assert upsilon(vs, alpha, K01) == pytest.approx(0.0, abs=1e-15)
    assert upsilon(0.25, 3.0, K01) == pytest.approx(-0.25, abs=1e-12)
    assert upsilon(0.3, 0.0, K01) == pytest.approx(1.3, abs=1e-12)  # transform at zero is 2


@pytest.mark.parametrize("kernel", [K01, product_gamma(1, 2.0), PhiProductKernel(4.0)],
                         ids=["k0", "k1a2", "phi4"])
@pytest.mark.parametrize("alpha", [0.5, 1.0, 3.0])
def test_upsilon_zero_at_matched_varsigma(kernel, alpha):
    vs = 1.0 - kernel.beta_hat(alpha)
    if vs <= 0:
        pytest.skip("transform above one at this alpha")
    assert abs(upsilon(vs, alpha, kernel)) < 1e-14


def test_initial_weight_value_poisson():
    init = InitialStateSpec(intensity=Exponential(rate=1.0))
    w = WeightFunction("h_varsigma_alpha", varsigma=0.5, alpha=3.0)
    # 1 + 0.5 * 1 + int exp(-x) exp(-3x) dx = 1.75
    assert initial_weight_value(init, w) == pytest.approx(1.75, abs=1e-12)
    fixed = InitialStateSpec(fixed=Configuration([0.0]))
    assert initial_weight_value(fixed, w) == pytest.approx(2.5)


def test_honesty_probe_subcritical():
    params = ModelParams(kernel=K01, m=2.0, horizon=10.0, record_grid=(2.0, 6.0, 10.0))
    init = InitialStateSpec(intensity=Exponential(rate=1.0))
    rep = honesty_probe(params, init, 400, base_seed=12)
    assert np.all(rep.capped_fraction == 0.0)
    assert rep.accounting_exact
    assert not rep.bound_applicable  # m = 2 sits below max{m1, alpha} here


def test_honesty_probe_supercritical_caps():
    params = ModelParams(kernel=K01, m=0.0, horizon=12.0, record_grid=(4.0, 8.0, 12.0), n_max=256)
    init = InitialStateSpec(fixed=Configuration([0.2]))
    rep = honesty_probe(params, init, 60, base_seed=13)
    assert rep.capped_fraction[-1] > 0.0
    assert rep.accounting_exact
    assert rep.h_bound_ok is None


def test_honesty_probe_bound_regime():
    rep0 = build_report(K01, sigma=3.0, target=0.5)
    params = ModelParams(kernel=K01, m=rep0.m2_alt + 0.1, horizon=2.0, record_grid=(0.5, 1.0, 2.0))
    init = InitialStateSpec(intensity=Exponential(rate=1.0))
    rep = honesty_probe(params, init, 2000, base_seed=14)
    assert rep.bound_applicable
    assert rep.h_bound_ok is True
    assert np.all(rep.capped_fraction == 0.0)
    payload = rep.to_json()
    assert payload["h_bound_ok"] is True
