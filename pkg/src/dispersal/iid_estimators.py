"""Estimators for the i.i.d.-pairs model Y_i = X_i + sigma D_i.

nearest_match, nearest_parent_density and brown_cdf use each child's nearest
parent; dutch_cdf ignores the parents; counting_cdf / counting_density count
parents within a sigma-window of every child and remove the expected number
of unrelated parents.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import Kernel, rect_kernel
from .model import PointClouds
from .windows import dense_row_sums, windowed_row_sums


@dataclass(frozen=True)
class NearestMatch:
    matched_parent_index: np.ndarray
    distance_scaled: np.ndarray
    signed_scaled: np.ndarray


class EmpiricalCdf:
    """Right-continuous empirical distribution function of a sample."""

    def __init__(self, sample):
        self.sample = np.sort(np.asarray(sample, dtype=float))

    def __call__(self, z):
        n = self.sample.size
        if n == 0:
            raise ValueError("empty sample")
        return np.searchsorted(self.sample, z, side="right") / n


def nearest_match(clouds: PointClouds, sigma: float) -> NearestMatch:
    """Nearest parent of every offspring by binary search; ties go to the smaller index."""
    x, y = clouds.parents, clouds.offspring
    if x.size == 0:
        raise ValueError("nearest parent needs at least one parent")
    if y.size == 0:
        raise ValueError("nearest parent needs at least one offspring")
    right = np.clip(np.searchsorted(x, y, side="left"), 0, x.size - 1)
    left = np.clip(right - 1, 0, x.size - 1)
    d_left = np.abs(y - x[left])
    d_right = np.abs(y - x[right])
    idx = np.where(d_left <= d_right, left, right)
    # several parents at the same position: take the first of the run
    idx = np.searchsorted(x, x[idx], side="left")
    # distinct parents whose distances round to the same float
    best = np.abs(y - x[idx])
    while True:
        step = (idx > 0) & (np.abs(y - x[np.maximum(idx - 1, 0)]) == best)
        if not step.any():
            break
        idx = np.where(step, idx - 1, idx)
    diff = y - x[idx]
    return NearestMatch(idx, np.abs(diff) / sigma, diff / sigma)


def dutch_cdf(clouds: PointClouds, sigma: float, k: Kernel, z0: float, h: float) -> float:
    """Kernel estimate of g_sigma(sigma z0) = F(z0), summing over shifts l >= 0.

    The kernel bandwidth is sigma * h.
    """
    if not k.bounded_support or k.support_radius > 0.5:
        raise ValueError(f"kernel {k.name!r} must be supported in [-1/2, 1/2]")
    y = clouds.offspring
    n = y.size
    if n == 0:
        raise ValueError("no offspring")
    bw = sigma * h
    reach = bw * k.support_radius
    # one extra shift on each side guards against rounding; those terms are 0 anyway
    lmin = max(0, int(np.ceil(sigma * z0 - y[-1] - reach)) - 1)
    lmax = int(np.floor(sigma * z0 - y[0] + reach)) + 1
    total = 0.0
    for ell in range(lmin, lmax + 1):
        total += float(np.sum(k.value((sigma * z0 - ell - y) / bw)))
    return total / (n * bw)


def nearest_parent_density(clouds: PointClouds, sigma: float, k: Kernel, z0: float, h: float) -> float:
    m = nearest_match(clouds, sigma)
    return float(np.mean(k.value((z0 - m.signed_scaled) / h)) / h)


def brown_cdf(clouds: PointClouds, sigma: float, n_obs: int, z0: float) -> float:
    """Invert H(z) = 1 - (1 - G(z)) (1 - 2 sigma z)^(n-1) with H replaced by the empirical CDF."""
    if not 0 <= z0 < 1.0 / (2.0 * sigma):
        raise ValueError(f"z0 must lie in [0, 1/(2 sigma)) = [0, {1 / (2 * sigma):g})")
    h = float(EmpiricalCdf(nearest_match(clouds, sigma).distance_scaled)(z0))
    return brown_from_h(h, sigma, z0, n_obs)


def brown_from_h(h_value: float, sigma: float, z0: float, n_obs: int) -> float:
    return 1.0 - (1.0 - 2.0 * sigma * z0) ** (-(n_obs - 1)) * (1.0 - h_value)


def _check_iid(clouds: PointClouds) -> int:
    if clouds.n_parents != clouds.n_offspring:
        raise ValueError(
            f"i.i.d. model needs equally many parents and offspring, got {clouds.n_parents} and {clouds.n_offspring}"
        )
    if clouds.n_parents == 0:
        raise ValueError("empty clouds")
    return clouds.n_parents


def _pair_window_sums(x, y, term, lo_offset, hi_offset, flat=None):
    """sum_j term(Y_i, X_j) for each i, with |X_j - Y_i| in [lo_offset, hi_offset] the support."""
    # support is the union of two mirrored intervals around each Y_i
    lo_offset = max(lo_offset, 0.0)
    left = windowed_row_sums(x, y, lambda yy, xx: np.where(xx <= yy, term(yy, xx), 0.0),
                             y - hi_offset, y - lo_offset,
                             *((y - flat[1], y - flat[0]) if flat else ()))
    right = windowed_row_sums(x, y, lambda yy, xx: np.where(xx > yy, term(yy, xx), 0.0),
                              y + lo_offset, y + hi_offset,
                              *((y + flat[0], y + flat[1]) if flat else ()))
    return left + right


def counting_cdf(clouds: PointClouds, sigma: float, z0: float, method: str = "window") -> float:
    """(1/n) #{(i, j): |X_j - Y_i| <= sigma z0} - 2 sigma (n - 1) z0."""
    n = _check_iid(clouds)
    x, y = clouds.parents, clouds.offspring
    radius = sigma * z0
    if method == "naive":
        count = dense_row_sums(x, y, lambda yy, xx: (np.abs(xx - yy) <= radius).astype(float)).sum()
    else:
        count = windowed_row_sums(
            x, y, lambda yy, xx: (np.abs(xx - yy) <= radius).astype(float),
            y - radius, y + radius, y - radius, y + radius,
        ).sum()
    return float(count / n - 2.0 * sigma * (n - 1) * z0)


def counting_density(clouds: PointClouds, sigma: float, h: float, z0: float, method: str = "window") -> float:
    """(1/n) sum_{i,j} K_h(z0 - |X_j - Y_i| / sigma) - 2 sigma (n - 1), K the rectangular kernel."""
    n = _check_iid(clouds)
    k = rect_kernel()
    x, y = clouds.parents, clouds.offspring

    def term(yy, xx):
        return k.value((z0 - np.abs(xx - yy) / sigma) / h)

    # K_h(z0 - d/sigma) != 0 iff d in sigma * [z0 - h/2, z0 + h/2]
    lo, hi = sigma * (z0 - h / 2), sigma * (z0 + h / 2)
    if method == "naive":
        sums = dense_row_sums(x, y, term)
    elif lo <= 0:
        # window around Y_i is a single interval; all points are inside the indicator
        sums = windowed_row_sums(x, y, term, y - hi, y + hi, y - hi, y + hi)
    else:
        sums = _pair_window_sums(x, y, term, lo, hi, flat=(lo, hi))
    return float(sums.sum() / (n * h) - 2.0 * sigma * (n - 1))
