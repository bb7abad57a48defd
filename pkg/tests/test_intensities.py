import numpy as np
import pytest
from scipy import integrate, stats

from driftbranch.intensities import (
    Exponential,
    Gamma,
    IntensityError,
    Tabulated,
    Uniform,
    intensity_from_json,
)

CATALOG = [
    Exponential(rate=1.0),
    Exponential(rate=2.5, weight=3.0),
    Uniform(lo=0.0, hi=1.0, weight=2.0),
    Uniform(lo=1.0, hi=2.0),
    Gamma(shape=2.0, rate=1.0),
    Gamma(shape=3.5, rate=2.0, weight=0.5),
    Tabulated(x=[0.0, 0.5, 1.0, 2.0], y=[0.0, 2.0, 1.0, 0.0]),
]


@pytest.mark.parametrize("k", CATALOG, ids=lambda k: type(k).__name__ + str(k.to_json()))
def test_mass_matches_quadrature(k):
    ub = k.support_upper(1e-12)
    val, _ = integrate.quad(k.density, 0, ub, limit=400)
    val += float(k.tail(ub))
    assert val == pytest.approx(k.mass(), rel=1e-8)


@pytest.mark.parametrize("k", CATALOG, ids=lambda k: type(k).__name__ + str(k.to_json()))
@pytest.mark.parametrize("t", [0.0, 0.3, 1.1, 4.0])
def test_tail_matches_quadrature(k, t):
    ub = max(k.support_upper(1e-13), t + 1.0)
    val, _ = integrate.quad(k.density, t, ub, limit=400)
    assert val == pytest.approx(float(k.tail(t)), rel=1e-7, abs=1e-12)


@pytest.mark.parametrize("k", CATALOG, ids=lambda k: type(k).__name__ + str(k.to_json()))
@pytest.mark.parametrize("alpha", [0.0, 0.7, 3.0])
def test_laplace_matches_quadrature(k, alpha):
    ub = k.support_upper(1e-13)
    val, _ = integrate.quad(lambda x: k.density(x) * np.exp(-alpha * x), 0, ub, limit=400)
    val += float(k.tail(ub))  # alpha-independent overestimate, only pads the tolerance
    assert float(k.laplace(alpha)) == pytest.approx(val, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("k", CATALOG, ids=lambda k: type(k).__name__ + str(k.to_json()))
def test_sampler_matches_distribution(k):
    rng = np.random.default_rng(1234)
    xs = k.sample(rng, 100_000)
    assert np.all(xs >= 0)

    def cdf(x):
        return 1.0 - np.asarray(k.tail(x)) / k.mass()

    res = stats.ks_1samp(xs, cdf)
    assert res.pvalue > 0.01


def test_tabulated_mass_exact():
    # trapezoid of the triangle/trapezoid profile: 0.5 + 0.75 + 0.5
    k = Tabulated(x=[0.0, 0.5, 1.0, 2.0], y=[0.0, 2.0, 1.0, 0.0])
    assert k.mass() == pytest.approx(1.75, abs=1e-15)
    assert float(k.tail(1.0)) == pytest.approx(0.5, abs=1e-15)
    assert float(k.tail(0.0)) == pytest.approx(1.75, abs=1e-15)
    assert float(k.tail(5.0)) == 0.0


def test_json_round_trip():
    for k in CATALOG:
        k2 = intensity_from_json(k.to_json())
        assert type(k2) is type(k)
        xs = np.linspace(0, 3, 50)
        assert np.allclose(k2.density(xs), k.density(xs))


@pytest.mark.parametrize(
    "bad",
    [
        {"type": "exponential", "rate": -1.0},
        {"type": "uniform", "lo": 2.0, "hi": 1.0},
        {"type": "gamma", "shape": 0.0},
        {"type": "tabulated", "x": [0.0, 1.0], "y": [-1.0, 0.0]},
        {"type": "tabulated", "x": [1.0, 0.0], "y": [1.0, 1.0]},
        {"type": "nope"},
        "not even an object",
    ],
)
def test_invalid_specs_rejected(bad):
    with pytest.raises(IntensityError):
        intensity_from_json(bad)
