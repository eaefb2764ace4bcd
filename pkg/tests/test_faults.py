import numpy as np
import pytest

from wlacons.errors import ConfigError
from wlacons.faults import (
    NodeKind,
    NodeSpec,
    NoiseSpec,
    RandomSpec,
    ifn_acts_normal,
    noise_from_uniform,
    sample_noise,
    sample_random,
)
from wlacons.rng import derive_substream

N = 100_000


def rng(tag):
    return derive_substream(11, [tag])


def test_degenerate_random_interval():
    assert sample_random(RandomSpec(5, 5), rng("a")) == 5
    assert np.all(sample_random(RandomSpec(5, 5), rng("a"), 100) == 5)


def test_random_mean_and_support():
    d = sample_random(RandomSpec(0, 1000), rng("b"), N)
    assert 495 <= d.mean() <= 505
    d = sample_random(RandomSpec(0, 50), rng("c"), N)
    assert d.min() >= 0 and d.max() <= 50


def test_zero_noise_is_zero():
    assert sample_noise(NoiseSpec(0.0), rng("d")) == 0
    assert np.all(sample_noise(NoiseSpec(0.0), rng("d"), 1000) == 0)


def test_noise_mean_and_strict_bound():
    d = sample_noise(NoiseSpec(10.0), rng("e"), N)
    assert -0.2 <= d.mean() <= 0.2
    assert np.abs(d).max() < 10


def test_noise_bound_is_strict_at_generator_extremes():
    u_max = 1.0 - 2.0**-53  # largest double a uniform [0, 1) draw can return
    assert noise_from_uniform(10.0, 0.0) > -10.0
    assert noise_from_uniform(10.0, u_max) < 10.0


def test_ifn_coin():
    assert ifn_acts_normal(1.0, rng("f"), 1000).all()
    assert not ifn_acts_normal(0.0, rng("f"), 1000).any()
    rate = ifn_acts_normal(0.8, rng("g"), N).mean()
    assert 0.79 <= rate <= 0.81


def test_reproducible_draws():
    assert np.array_equal(sample_noise(NoiseSpec(3), rng("h"), 50), sample_noise(NoiseSpec(3), rng("h"), 50))


def test_spec_validation():
    with pytest.raises(ConfigError):
        RandomSpec(2, 1)
    with pytest.raises(ConfigError):
        NoiseSpec(-1)
    with pytest.raises(ConfigError):
        NodeSpec.ifn(1.5)
    with pytest.raises(ConfigError):
        ifn_acts_normal(-0.1, rng("i"))


def test_node_spec_factories():
    assert not NodeSpec.normal().is_faulty
    assert NodeSpec.pfn().kind == NodeKind.PFN and NodeSpec.pfn().is_faulty
    s = NodeSpec.ifn(0.8)
    assert s.kind == NodeKind.IFN and s.p_normal == 0.8
    assert NodeSpec.pfn().random == RandomSpec(0, 1000)
