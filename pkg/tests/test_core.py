import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from driftbranch.core import (
    Configuration,
    ConfigurationError,
    InitialStateSpec,
    WeightFunction,
    evaluate,
    sample_initial,
    shift,
)
from driftbranch.intensities import Exponential, Uniform

traits_lists = st.lists(st.floats(0.0, 50.0), max_size=12)


def test_configuration_sorted_and_immutable():
    c = Configuration([3.0, 1.0, 2.0, 1.0])
    assert c.traits.tolist() == [1.0, 1.0, 2.0, 3.0]  # duplicates preserved
    assert c.min_trait == 1.0
    with pytest.raises(ValueError):
        c.traits[0] = 5.0


def test_configuration_rejects_negative():
    with pytest.raises(ConfigurationError):
        Configuration([-0.1])


def test_evaluate_examples():
    h = WeightFunction("h_varsigma_alpha", varsigma=1.0, alpha=1.0)
    assert evaluate(h, Configuration()) == 1.0
    h2 = WeightFunction("h_varsigma_alpha", varsigma=0.5, alpha=1.0)
    assert evaluate(h2, Configuration([0.0])) == pytest.approx(2.5, abs=1e-15)
    mom = WeightFunction("power_moment", l=2)
    assert evaluate(mom, Configuration([1.0, 2.0, 3.0])) == 9.0
    hm = WeightFunction("h_m", m=2.0)
    assert evaluate(hm, Configuration([4.0, 4.0])) == 5.0
    pp = WeightFunction("phi_sigma_product", sigma=3.0)
    assert evaluate(pp, Configuration([1.0])) == pytest.approx(0.125, abs=1e-15)


@given(traits_lists)
def test_h_lower_bound(traits):
    gamma = Configuration(traits)
    h = WeightFunction("h_varsigma_alpha", varsigma=0.7, alpha=2.0)
    assert evaluate(h, gamma) >= 1.0 + 0.7 * len(gamma) - 1e-12


def test_shift_examples():
    assert shift(Configuration([1.0, 2.0]), 0.5).traits.tolist() == [1.5, 2.5]
    assert shift(Configuration([1.0, 2.0]), -1.0).traits.tolist() == [0.0, 1.0]
    assert len(shift(Configuration(), -7.0)) == 0
    with pytest.raises(ConfigurationError):
        shift(Configuration([1.0, 2.0]), -1.5)


@given(traits_lists, st.floats(0, 10), st.floats(0, 10))
@settings(max_examples=60)
def test_shift_flow_property(traits, s, t):
    gamma = Configuration(traits)
    a = shift(shift(gamma, s), t)
    b = shift(gamma, s + t)
    assert np.allclose(a.traits, b.traits, rtol=0, atol=1e-9)


def test_weight_validation():
    with pytest.raises(ValueError):
        WeightFunction("h_varsigma_alpha", varsigma=0.0, alpha=1.0)
    with pytest.raises(ValueError):
        WeightFunction("power_moment", l=-1)
    with pytest.raises(ValueError):
        WeightFunction("nope")


def test_json_round_trips():
    c = Configuration([0.5, 1.5])
    assert Configuration.from_json(c.to_json()).traits.tolist() == [0.5, 1.5]
    for w in [
        WeightFunction("h_m", m=1.0),
        WeightFunction("h_varsigma_alpha", varsigma=0.5, alpha=3.0),
        WeightFunction("power_moment", l=2),
        WeightFunction("phi_sigma_product", sigma=3.0),
    ]:
        assert WeightFunction.from_json(w.to_json()) == w
    spec = InitialStateSpec(intensity=Exponential(rate=1.0))
    spec2 = InitialStateSpec.from_json(spec.to_json())
    assert spec2.intensity == spec.intensity
    fx = InitialStateSpec(fixed=Configuration([1.0, 2.0]))
    assert InitialStateSpec.from_json(fx.to_json()).fixed.traits.tolist() == [1.0, 2.0]


def test_initial_state_spec_validation():
    with pytest.raises(ValueError):
        InitialStateSpec()
    with pytest.raises(ValueError):
        InitialStateSpec(intensity=Exponential(), fixed=Configuration([1.0]))


def test_sample_initial_fixed_passthrough():
    spec = InitialStateSpec(fixed=Configuration([1.0, 2.0]))
    out = sample_initial(spec, np.random.default_rng(0))
    assert out.traits.tolist() == [1.0, 2.0]


def test_sample_initial_poisson_mean_exponential():
    # mean count equals the intensity mass (here 1)
    spec = InitialStateSpec(intensity=Exponential(rate=1.0))
    rng = np.random.default_rng(42)
    counts = np.array([len(sample_initial(spec, rng)) for _ in range(100_000)])
    assert counts.mean() == pytest.approx(1.0, abs=0.01)


def test_sample_initial_poisson_mean_uniform():
    spec = InitialStateSpec(intensity=Uniform(lo=0.0, hi=1.0, weight=2.0))
    rng = np.random.default_rng(7)
    counts = np.array([len(sample_initial(spec, rng)) for _ in range(100_000)])
    assert counts.mean() == pytest.approx(2.0, abs=0.02)


def test_sample_initial_count_chi_square():
    # goodness of fit of the count distribution at the 1% level
    spec = InitialStateSpec(intensity=Exponential(rate=1.0))
    rng = np.random.default_rng(5)
    n = 100_000
    counts = np.array([len(sample_initial(spec, rng)) for _ in range(n)])
    kmax = counts.max()
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    expected = stats.poisson.pmf(np.arange(kmax + 1), 1.0) * n
    expected[-1] = n - expected[:-1].sum()  # fold the tail into the last bin
    while expected[-1] < 5 and expected.size > 2:
        expected[-2] += expected[-1]
        observed[-2] += observed[-1]
        expected, observed = expected[:-1], observed[:-1]
    res = stats.chisquare(observed, expected)
    assert res.pvalue > 0.01


def test_sample_initial_trait_distribution():
    spec = InitialStateSpec(intensity=Exponential(rate=1.0))
    rng = np.random.default_rng(11)
    traits = np.concatenate(
        [sample_initial(spec, rng).traits for _ in range(20_000)]
    )
    res = stats.ks_1samp(traits, stats.expon.cdf)
    assert res.pvalue > 0.01
