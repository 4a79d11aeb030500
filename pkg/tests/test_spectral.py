import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dispersal.kernels import bandlimited_kernel, paper_kernel
from dispersal.model import ModelParams, PointClouds
from dispersal.point_estimators import TheoryRangeWarning
from dispersal.simulation import SeedSpec, sample_cox
from dispersal.spectral import (
    IllPosedError,
    Mild,
    ParentDistribution,
    Severe,
    SpectralConfig,
    gaussian_parent,
    identity_parent,
    laplace_parent,
    parse_parent,
    spectral_bandwidth,
    spectral_deconv,
    spectral_weights,
)

BL = bandlimited_kernel()


def _cox(params, beta, parent, stream=0):
    return sample_cox(params, beta, SeedSpec(777, stream), parent=parent)


def test_identity_parent_is_direct_kde(beta):
    p = ModelParams(300, sigma=0.3)
    clouds = _cox(p, beta, identity_parent(0.5))
    h1 = 0.4
    for z0 in (-0.2, 0.0, 0.1):
        got = spectral_deconv(clouds, p, identity_parent(), BL, z0, h1)
        direct = BL.value((z0 - clouds.offspring / p.sigma) / h1).sum() / h1 / (p.n * p.lam * p.mu)
        assert got == pytest.approx(direct, abs=1e-8)


def test_empty_offspring_gives_zero():
    p = ModelParams(10, sigma=0.5)
    empty = PointClouds.from_unsorted(np.array([0.2]), np.array([]))
    assert spectral_deconv(empty, p, laplace_parent(), BL, 0.0, 0.5) == 0.0


def test_parent_registry():
    lap = parse_parent("laplace:b=0.2")
    assert lap.illposedness == Mild(2.0)
    assert abs(lap.char_fn(0.0) - 1) < 1e-15
    g = parse_parent("gaussian:s=0.1")
    assert isinstance(g.illposedness, Severe)
    u = np.linspace(-30, 30, 7)
    for par in (lap, g):
        np.testing.assert_allclose(par.char_fn(-u), np.conj(par.char_fn(u)), atol=1e-15)
    with pytest.raises(ValueError, match="characteristic function"):
        parse_parent("uniform")
    with pytest.raises(ValueError):
        parse_parent("cauchy")


def test_laplace_density_matches_char_fn():
    lap = laplace_parent(0.1)
    for u in (0.0, 3.0, 17.0):
        re = integrate.quad(lambda x: lap.density(x) * math.cos(u * x), -np.inf, np.inf, points=None)[0]
        im = integrate.quad(lambda x: lap.density(x) * math.sin(u * x), -np.inf, np.inf)[0]
        assert complex(re, im) == pytest.approx(complex(lap.char_fn(u)), abs=1e-7)


def test_missing_fourier_raises():
    with pytest.raises(ValueError, match="Fourier"):
        spectral_weights(paper_kernel(), laplace_parent(), 0.5, 0.5)


def test_ill_posed_error_names_u():
    g = gaussian_parent(0.1)
    with pytest.raises(IllPosedError, match="u ="):
        spectral_weights(BL, g, 0.01, 0.1)


def test_cap_small_modulus_flags(beta):
    g = gaussian_parent(0.1)
    p = ModelParams(100, sigma=0.1)
    clouds = _cox(p, beta, g)
    cfg = SpectralConfig(256, cap_small_modulus=True)
    with pytest.warns(TheoryRangeWarning):
        v = spectral_deconv(clouds, p, g, BL, 0.0, 0.01, cfg)
    assert np.isfinite(v)


def test_config_validation():
    with pytest.raises(ValueError):
        SpectralConfig(quadrature_nodes=32)
    with pytest.raises(ValueError):
        SpectralConfig(min_charfn_modulus=0.0)


def test_node_doubling_converges(beta):
    p = ModelParams(2000, sigma=0.5)
    lap = laplace_parent(0.1)
    clouds = _cox(p, beta, lap)
    a = spectral_deconv(clouds, p, lap, BL, 0.0, 0.5, SpectralConfig(2048))
    b = spectral_deconv(clouds, p, lap, BL, 0.0, 0.5, SpectralConfig(4096))
    assert abs(a - b) < 1e-6 * abs(b)


def test_weight_function_integrates_to_one():
    h1, sigma = 0.5, 0.5
    w = spectral_weights(BL, laplace_parent(0.1), h1, sigma)
    R = 50 * h1 * max(1.0, 0.1 / sigma)
    x = np.linspace(-R, R, 40001)
    real, _ = w(x)
    assert integrate.simpson(real, x=x) == pytest.approx(1.0, abs=1e-4)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(0.5, 0.3, 40)
    p = ModelParams(40, sigma=0.5)
    lap = laplace_parent(0.1)
    base = spectral_deconv(PointClouds.from_unsorted(np.array([0.5]), y), p, lap, BL, 0.0, 0.5)
    perm = spectral_deconv(PointClouds.from_unsorted(np.array([0.5]), rng.permutation(y)), p, lap, BL, 0.0, 0.5)
    assert perm == pytest.approx(base, rel=1e-12, abs=1e-14)


def test_bandwidth_examples():
    assert spectral_bandwidth(ModelParams(10_000, sigma=1.0), 2.0, laplace_parent()) == pytest.approx(
        1e4 ** (-1 / 9), rel=1e-12)
    assert spectral_bandwidth(ModelParams(10_000, sigma=1.0), 2.0, laplace_parent()) == pytest.approx(0.3594, abs=1e-4)
    sev = ParentDistribution("sev", None, None, Severe(0.5, 2.0), None)
    assert spectral_bandwidth(SimpleNamespace(n=math.exp(8), sigma=1.0), 2.0, sev) == pytest.approx(0.5, rel=1e-12)
    half = ParentDistribution("half", None, None, Mild(0.5), None)
    for n in (100, 5000):
        for s in (1.0, 2.0):
            assert spectral_bandwidth(ModelParams(n, sigma=1.0), s, half) == pytest.approx(
                n ** (-1 / (2 * s + 2)), rel=1e-12)
    with pytest.raises(ValueError):
        spectral_bandwidth(ModelParams(100, sigma=1.0), 0.0, laplace_parent())


def test_mild_bandwidth_shrinks_with_n():
    lap = laplace_parent()
    hs = [spectral_bandwidth(ModelParams(n, sigma=0.5), 2.0, lap) for n in (10**2, 10**3, 10**4)]
    assert hs[0] > hs[1] > hs[2]
