import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from dispersal.iid_estimators import (
    EmpiricalCdf,
    brown_cdf,
    brown_from_h,
    counting_cdf,
    counting_density,
    dutch_cdf,
    nearest_match,
    nearest_parent_density,
)
from dispersal.kernels import paper_kernel, rect_kernel
from dispersal.model import PointClouds
from dispersal.simulation import SeedSpec, sample_iid_pairs


def test_nearest_match_examples():
    m = nearest_match(PointClouds.from_unsorted([0.2, 0.8], [0.25]), 0.1)
    assert m.matched_parent_index.tolist() == [0]
    assert m.distance_scaled[0] == pytest.approx(0.5)
    m = nearest_match(PointClouds.from_unsorted([0.2, 0.8], [0.8]), 0.1)
    assert m.distance_scaled[0] == 0.0
    with pytest.raises(ValueError):
        nearest_match(PointClouds(np.array([]), np.array([0.1])), 0.1)
    with pytest.raises(ValueError):
        nearest_match(PointClouds(np.array([0.1]), np.array([])), 0.1)


def test_nearest_match_tie_goes_to_smaller_index():
    m = nearest_match(PointClouds.from_unsorted([0.25, 0.75], [0.5]), 1.0)
    assert m.matched_parent_index.tolist() == [0]


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.lists(st.floats(-0.2, 1.2), min_size=1, max_size=40))
def test_nearest_match_is_minimal(xs, ys):
    c = PointClouds.from_unsorted(xs, ys)
    m = nearest_match(c, 0.5)
    brute = np.min(np.abs(c.offspring[:, None] - c.parents[None, :]), axis=1) / 0.5
    np.testing.assert_array_equal(m.distance_scaled, brute)
    # smallest index among the minimisers
    d = np.abs(c.offspring[:, None] - c.parents[None, :])
    first = np.argmax(d == d.min(axis=1, keepdims=True), axis=1)
    np.testing.assert_array_equal(m.matched_parent_index, first)


def test_mismatch_rate(beta):
    n, sigma, reps = 100, 1e-4, 1000
    wrong = 0
    for r in range(reps):
        c = sample_iid_pairs(n, sigma, beta, SeedSpec(3, r))
        wrong += int(np.sum(nearest_match(c, sigma).matched_parent_index != c.parentage))
    rate = wrong / (n * reps)
    assert rate <= sigma * n + 3 * math.sqrt(sigma * n * (1 - sigma * n) / (n * reps))


def test_empirical_cdf():
    rng = np.random.default_rng(2)
    sample = rng.normal(size=300)
    ecdf = EmpiricalCdf(sample)
    q = np.sort(rng.normal(scale=2, size=1000))
    vals = ecdf(q)
    assert np.all(np.diff(vals) >= 0)
    np.testing.assert_array_equal(vals, [(sample <= z).mean() for z in q])
    assert ecdf(sample.max()) == 1.0
    with pytest.raises(ValueError):
        EmpiricalCdf([])(0.0)


def test_dutch_examples():
    c = PointClouds.from_unsorted([0.3], [0.3])
    assert dutch_cdf(c, 0.5, rect_kernel(), 0.7, 0.4) == pytest.approx(5.0)
    assert dutch_cdf(c, 0.5, rect_kernel(), -3.0, 0.4) == 0.0
    with pytest.raises(ValueError):
        dutch_cdf(c, 0.5, paper_kernel(), 0.0, 0.4)


def test_dutch_matches_brute_force_shift_sum(beta):
    c = sample_iid_pairs(200, 0.5, beta, SeedSpec(4))
    k, sigma, h = rect_kernel(), 0.5, 0.3
    for z0 in (-0.6, 0.0, 0.4, 1.7):
        ref = sum(float(np.sum(k.value((sigma * z0 - ell - c.offspring) / (sigma * h))))
                  for ell in range(0, 10)) / (c.n_offspring * sigma * h)
        assert dutch_cdf(c, sigma, k, z0, h) == pytest.approx(ref, abs=1e-12)


@pytest.mark.slow
def test_dutch_mc(beta):
    n, sigma = 10_000, 0.5
    h = (sigma * n) ** (-1 / 5)
    v = [dutch_cdf(sample_iid_pairs(n, sigma, beta, SeedSpec(5, r)), sigma, rect_kernel(), 0.0, h) for r in range(100)]
    assert abs(np.mean(v) - 0.6875) < 0.05


def test_nearest_parent_density_examples():
    c = PointClouds.from_unsorted([0.2], [0.2])
    assert nearest_parent_density(c, 0.1, paper_kernel(), 0.0, 0.5) == 2.0
    assert nearest_parent_density(c, 0.1, paper_kernel(), 10.0, 0.5) == 0.0


def test_nearest_parent_density_uses_signed_difference():
    c = PointClouds.from_unsorted([0.5], [0.52])
    k = paper_kernel()
    plus = nearest_parent_density(c, 0.1, k, 0.2, 0.1)
    minus = nearest_parent_density(c, 0.1, k, -0.2, 0.1)
    assert plus == 10.0 and minus == 0.0


@pytest.mark.slow
def test_nearest_parent_consistency_degrades(beta):
    n, h, reps = 1000, 1000 ** (-1 / 5), 200
    k = paper_kernel()

    def rmse(sigma):
        v = np.array([nearest_parent_density(sample_iid_pairs(n, sigma, beta, SeedSpec(6, r)), sigma, k, 0.0, h)
                      for r in range(reps)])
        return math.sqrt(np.mean((v - 1.5) ** 2))

    assert rmse(n ** -2.0) < rmse(n ** -0.9)


def test_brown_examples():
    assert brown_from_h(1.0, 0.3, 0.2, 50) == 1.0
    assert brown_from_h(2 / 3, 0.001, 0.25, 3) == pytest.approx(1 - 0.9995 ** -2 / 3, abs=1e-15)
    assert brown_from_h(2 / 3, 0.001, 0.25, 3) == pytest.approx(0.6663331, abs=1e-7)
    c = PointClouds.from_unsorted([0.5, 0.5, 0.5], [0.5001, 0.5002, 0.5003])
    assert brown_cdf(c, 0.001, 3, 0.25) == pytest.approx(1 - 0.9995 ** -2 / 3, abs=1e-12)
    with pytest.raises(ValueError):
        brown_cdf(c, 0.1, 3, 5.0)
    with pytest.raises(ValueError):
        brown_cdf(c, 0.1, 3, -0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.integers(2, 2000), st.floats(1e-6, 1e-2))
def test_brown_converges_to_h(h_value, n, sz_n):
    z0 = 0.3
    sigma = sz_n / (z0 * n)
    g = brown_from_h(h_value, sigma, z0, n)
    assert abs(g - h_value) <= 10 * sigma * z0 * n * (1 - h_value) + 1e-15


@pytest.mark.slow
def test_brown_variance_bound(beta):
    n, z0, reps = 1000, 0.25, 400
    sigma = 1 / n
    v = np.array([brown_cdf(sample_iid_pairs(n, sigma, beta, SeedSpec(9, r)), sigma, n, z0) for r in range(reps)])
    bound = (1 / n + sigma) * math.exp(4.5 * sigma * z0 * n)
    # C frozen from a 1000-replicate run (observed ratio ~1.9)
    assert v.var() <= 4.0 * bound


def test_counting_examples():
    c = PointClouds.from_unsorted([0.2, 0.8], [0.21, 0.79])
    assert counting_cdf(c, 0.1, 0.5) == pytest.approx(0.9)
    assert counting_cdf(c, 0.1, 0.0) == 0.0
    with pytest.raises(ValueError):
        counting_cdf(PointClouds.from_unsorted([0.2, 0.8], [0.21]), 0.1, 0.5)
    with pytest.raises(ValueError):
        counting_density(PointClouds.from_unsorted([0.2], [0.21, 0.3]), 0.1, 0.2, 0.5)


def test_counting_density_examples():
    c = PointClouds.from_unsorted([0.2, 0.8], [0.6, 0.1])
    # no pair within sigma*h/2 of sigma*z0 = 0.001
    assert counting_density(c, 0.01, 0.05, 0.1) == pytest.approx(-2 * 0.01 * 1)
    one = PointClouds.from_unsorted([0.4], [0.4])
    assert counting_density(one, 0.3, 0.5, 0.0) == 2.0


def test_counting_fast_path_equivalence(beta):
    rng = np.random.default_rng(17)
    for t in range(100):
        n = int(rng.integers(1, 3000))
        sigma = float(10 ** rng.uniform(-4, 0))
        c = sample_iid_pairs(n, sigma, beta, SeedSpec(23, t))
        z0, h = float(rng.uniform(0, 1)), float(rng.uniform(0.02, 1))
        a, b = counting_cdf(c, sigma, z0), counting_cdf(c, sigma, z0, method="naive")
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)
        a, b = counting_density(c, sigma, h, z0), counting_density(c, sigma, h, z0, method="naive")
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@pytest.mark.slow
def test_counting_mc_means(beta):
    n, sigma, z0, reps = 1000, 1e-4, 0.25, 400
    G = integrate.quad(lambda z: float(beta.density(z)), -z0, z0)[0]
    g = float(beta.density(z0) + beta.density(-z0))
    h = n ** (-1 / 5)
    cdf_v, dens_v = [], []
    for r in range(reps):
        c = sample_iid_pairs(n, sigma, beta, SeedSpec(29, r))
        cdf_v.append(counting_cdf(c, sigma, z0))
        dens_v.append(counting_density(c, sigma, h, z0))
    cdf_v, dens_v = np.array(cdf_v), np.array(dens_v)
    assert abs(cdf_v.mean() - G) < 4 * cdf_v.std(ddof=1) / math.sqrt(reps)
    # the density estimate also carries an O(h^2) smoothing bias; f is a quadratic near 0.25
    smooth = integrate.quad(lambda u: float(beta.density(z0 + h * u) + beta.density(-z0 - h * u)), -0.5, 0.5)[0]
    assert abs(dens_v.mean() - smooth) < 4 * dens_v.std(ddof=1) / math.sqrt(reps)
    assert abs(smooth - g) < 0.1


@pytest.mark.slow
def test_counting_beats_brown_at_large_sigma_n(beta):
    # sigma n ~ 32: Brown's inversion factor (1 - 2 sigma z0)^-(n-1) ~ e^16, so H_n carries
    # almost no information on G and the estimate collapses to 1; counting stays consistent
    n, sigma, z0, reps = 1000, 10 ** -1.5, 0.25, 150
    G = float(beta.cdf(z0) - beta.cdf(-z0))
    cv, bv = np.empty(reps), np.empty(reps)
    for r in range(reps):
        c = sample_iid_pairs(n, sigma, beta, SeedSpec(31, r))
        cv[r] = counting_cdf(c, sigma, z0)
        bv[r] = brown_cdf(c, sigma, n, z0)
    assert np.mean((cv - G) ** 2) < np.mean((bv - G) ** 2)
