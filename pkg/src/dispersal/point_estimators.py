"""Estimators of f(z0) from the parent/offspring point-process observations.

The central statistic is the double sum

    J(z0) = 1/(n lam mu sigma h1) sum_{i,j} K'(z0/h1 - Y_j/(sigma h1)) K(z0/h2 - (Y_j - X_i)/(sigma h2))

from which the large-scale (deconvolution) and small-scale (interaction)
estimators are obtained by normalisation and bias correction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .kernels import Kernel
from .model import HALF, DispersalModel, ModelParams, PointClouds
from .windows import dense_row_sums, window_bounds, windowed_row_sums


class TheoryRangeWarning(UserWarning):
    """Bandwidths or evaluation point outside the range covered by the theory."""


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class Bandwidths:
    h1: float
    h2: float

    def __post_init__(self):
        if not (self.h1 > 0 and self.h2 > 0):
            raise ValueError(f"bandwidths must be positive, got h1={self.h1}, h2={self.h2}")


def _require_differentiable(k: Kernel):
    if not k.differentiable:
        raise ValueError(f"kernel {k.name!r} is not differentiable")


def _emit(flags, warn):
    if warn and flags:
        warnings.warn("; ".join(flags), TheoryRangeWarning, stacklevel=3)


def z0_flags(z0) -> list:
    return [] if -HALF < z0 < HALF else ["z0_exterior"]


def f1_flags(params: ModelParams, h1: float, z0: float = 0.0) -> list:
    flags = z0_flags(z0)
    if not 1.0 / (params.sigma * params.n) <= h1 <= 1.0:
        flags.append("h1_out_of_range")
    return flags


def f2_flags(params: ModelParams, h2: float, z0: float = 0.0) -> list:
    flags = z0_flags(z0)
    if not 0 < h2 <= 1:
        flags.append("h2_out_of_range")
    return flags


# ---------------------------------------------------------------------------
# the joint statistic

def _psi1_weights(k: Kernel, y, z0, sigma, h1):
    return k.derivative(z0 / h1 - y / (sigma * h1))


def _inner_term(k: Kernel, z0, sigma, h2):
    def term(y, x):
        return k.value(z0 / h2 - (y - x) / (sigma * h2))
    return term


def _inner_sums(k: Kernel, parents, ys, z0, sigma, h2, method):
    """sum_i K(z0/h2 - (y - X_i)/(sigma h2)) for each y in ``ys``."""
    term = _inner_term(k, z0, sigma, h2)
    if method == "naive" or not k.bounded_support:
        return dense_row_sums(parents, ys, term)
    r, q = k.support_radius, k.flat_radius
    lo = ys - sigma * (z0 + h2 * r)
    hi = ys - sigma * (z0 - h2 * r)
    if q > 0:
        return windowed_row_sums(parents, ys, term, lo, hi,
                                 ys - sigma * (z0 + h2 * q), ys - sigma * (z0 - h2 * q))
    return windowed_row_sums(parents, ys, term, lo, hi)


def _active_offspring(k: Kernel, y, z0, sigma, h1):
    """Offspring where K'(z0/h1 - Y/(sigma h1)) can be nonzero (outside the flat part)."""
    if not k.bounded_support:
        return y
    c, r, q = sigma * z0, sigma * h1 * k.support_radius, sigma * h1 * k.flat_radius
    start, stop = window_bounds(y, c - r, c + r, outward=True)
    if q > 0:
        fstart, fstop = window_bounds(y, c - q, c + q, outward=False)
        fstart, fstop = max(int(fstart), int(start)), min(int(fstop), int(stop))
        if fstop > fstart:
            return np.concatenate([y[start:fstart], y[fstop:stop]])
    return y[start:stop]


def joint_statistic(clouds: PointClouds, params: ModelParams, k: Kernel, z0: float,
                    bw: Bandwidths, method: str = "window") -> float:
    """The double sum J(z0) with weights K' (bandwidth h1) and K (bandwidth h2).

    ``method="naive"`` evaluates all |X| x |Y| pairs and exists as a reference
    for the windowed path.
    """
    _require_differentiable(k)
    sigma, h1, h2 = params.sigma, bw.h1, bw.h2
    if method == "naive":
        ys = clouds.offspring
    else:
        ys = _active_offspring(k, clouds.offspring, z0, sigma, h1)
    if ys.size == 0 or clouds.n_parents == 0:
        return 0.0
    w = _psi1_weights(k, ys, z0, sigma, h1)
    if method != "naive":
        keep = w != 0.0
        ys, w = ys[keep], w[keep]
    inner = _inner_sums(k, clouds.parents, ys, z0, sigma, h2, method)
    norm = params.n * params.lam * params.mu * sigma * h1
    return float(np.dot(w, inner) / norm)


def normalized_statistic(clouds, params, k, z0, bw, method="window") -> float:
    """(1/(n lam mu)) sum_{i,j} psi1(Y_j) psi2((Y_j - X_i)/sigma); its mean is the bias oracle's expected_statistic."""
    return joint_statistic(clouds, params, k, z0, bw, method) / (bw.h1 * bw.h2)


# ---------------------------------------------------------------------------
# estimators across scales

def f_hat_1(clouds, params, k, z0: float, h1: float, *, method="window", warn=True) -> float:
    """Large-scale (deconvolution) estimator, h2 = 8/sigma."""
    _emit(f1_flags(params, h1, z0), warn)
    j = joint_statistic(clouds, params, k, z0, Bandwidths(h1, 8.0 / params.sigma), method)
    return j / (params.n * params.lam * h1)


def f_hat_1_expanded(clouds, params, k, z0: float, h1: float) -> float:
    """Same estimator written as an outer K' sum times the normalised parent sum."""
    _require_differentiable(k)
    sigma, nl = params.sigma, params.n * params.lam
    y, x = clouds.offspring, clouds.parents
    if y.size == 0 or x.size == 0:
        return 0.0
    outer = k.derivative(z0 / h1 - y / (sigma * h1))
    inner = dense_row_sums(x, y, lambda yy, xx: k.value(sigma * z0 / 8.0 - (yy - xx) / 8.0)) / nl
    return float(np.dot(outer, inner) / (sigma * nl * params.mu * h1 * h1))


def f2_h1(sigma: float, h2: float, mode: str = "practical") -> float:
    if mode == "theoretical":
        return 1.0 / (2.0 * sigma)
    if mode == "practical":
        return max(4.0, 1.0 / sigma - 1.1 * h2)
    raise ValueError(f"unknown h1 mode {mode!r}")


def f_hat_2(clouds, params, k, z0: float, h2: float, h1_mode: str = "practical",
            *, method="window", warn=True) -> float:
    """Small-scale (interaction) estimator with the -sigma n lam bias correction."""
    if params.sigma >= 1.0 / 8.0:
        raise ValueError(f"small-scale estimator needs sigma < 1/8, got {params.sigma}")
    _emit(f2_flags(params, h2, z0), warn)
    h1 = f2_h1(params.sigma, h2, h1_mode)
    j = joint_statistic(clouds, params, k, z0, Bandwidths(h1, h2), method)
    return j / h2 - params.sigma * params.n * params.lam


def f_hat_dec(clouds, params, k, z0: float, h1: float) -> float:
    """Pure deconvolution estimator, normalised by the observed number of offspring."""
    _require_differentiable(k)
    y = clouds.offspring
    if y.size == 0:
        raise ValueError("deconvolution estimator needs at least one offspring")
    sigma = params.sigma
    ys = _active_offspring(k, y, z0, sigma, h1)
    total = np.sum(k.derivative(z0 / h1 - ys / (sigma * h1)))
    return float(total / (y.size * sigma * h1 * h1))


def f_hat_int(clouds, params, k, z0: float, h2: float, *, method="window") -> float:
    """Interaction estimator: kernel smoothing of all scaled differences (Y_j - X_i)/sigma."""
    y = clouds.offspring
    if y.size == 0:
        raise ValueError("interaction estimator needs at least one offspring")
    inner = _inner_sums(k, clouds.parents, y, z0, params.sigma, h2, method)
    return float(inner.sum() / (y.size * h2))


def estimate_lambda(clouds: PointClouds, n: int) -> float:
    return clouds.n_parents / n


# ---------------------------------------------------------------------------
# bandwidth rules

def bandwidth_rule(params: ModelParams, s: float = 2.0, estimator: str = "f1", c: float = 0.7,
                   h1_mode: str = "practical") -> Bandwidths:
    """Rate-optimal bandwidths c (n sigma)^(-1/(2s+3)) and c min(n, 1/sigma)^(-1/(2s+1)).

    f1 pairs h1 with h2 = 8/sigma; f2 pairs h2 with its h1 rule; for dec and
    int both rule values are returned and each estimator uses its own.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    n, sigma = params.n, params.sigma
    h1 = c * (n * sigma) ** (-1.0 / (2 * s + 3))
    h2 = c * min(n, 1.0 / sigma) ** (-1.0 / (2 * s + 1))
    if estimator == "f1":
        return Bandwidths(h1, 8.0 / sigma)
    if estimator == "f2":
        return Bandwidths(f2_h1(sigma, h2, h1_mode), h2)
    if estimator in ("dec", "int"):
        return Bandwidths(h1, h2)
    raise ValueError(f"unknown estimator {estimator!r}")


# ---------------------------------------------------------------------------
# quadrature oracle for the mean of the normalised statistic

@dataclass(frozen=True)
class BiasOracle:
    u_sigma: float
    v_sigma: float
    expected_statistic: float
    predictions: dict


def _quad(fn, a, b, points, tol):
    pts = sorted({p for p in points if a < p < b})
    val, err = integrate.quad(fn, a, b, points=pts or None, epsabs=tol, epsrel=tol, limit=500)
    if err > 10 * tol * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature error {err:.3g} on [{a}, {b}]")
    return val


def u_sigma(params, model: DispersalModel, k: Kernel, z0, bw: Bandwidths, tol=1e-10) -> float:
    """int psi1(y) (psi2 * 1_[0,1/sigma])(y/sigma) (f_sigma * 1_[0,1])(y) dy.

    With y = sigma (z0 - h1 u) this is (1/h1) int K'(u) W(y) g(y) du where
    W(y) = Kint((z0 - (y-1)/sigma)/h2) - Kint((z0 - y/sigma)/h2) and
    g(y) = F(y/sigma) - F((y-1)/sigma).
    """
    sigma, h1, h2 = params.sigma, bw.h1, bw.h2
    K1 = k.antiderivative

    def integrand(u):
        y = sigma * (z0 - h1 * u)
        w = K1((z0 - (y - 1.0) / sigma) / h2) - K1((z0 - y / sigma) / h2)
        g = model.cdf(y / sigma) - model.cdf((y - 1.0) / sigma)
        return float(k.derivative(u) * w * g)

    r = k.support_radius
    q = k.flat_radius
    pts = []
    # kinks of g and W mapped to the u variable
    for y in (-sigma * HALF, sigma * HALF, 1 - sigma * HALF, 1 + sigma * HALF):
        pts.append((z0 - y / sigma) / h1)
    for t in (-r, -q, q, r):
        for shift in (0.0, 1.0):
            y = sigma * (z0 - h2 * t) + shift
            pts.append((z0 - y / sigma) / h1)
    total = _quad(integrand, -r, -q, pts, tol) + _quad(integrand, q, r, pts, tol)
    return total / h1


def v_sigma(params, model: DispersalModel, k: Kernel, z0, bw: Bandwidths, tol=1e-10) -> float:
    """int (psi1 * 1_[-1,0])(sigma z) psi2(z) f(z) dz, with the inner convolution in closed form."""
    sigma, h1, h2 = params.sigma, bw.h1, bw.h2

    def integrand(z):
        outer = (k.value((z0 - z) / h1) - k.value((z0 - z - 1.0 / sigma) / h1)) / h1
        return float(outer * k.value((z0 - z) / h2) / h2 * model.density(z))

    r, q = k.support_radius, k.flat_radius
    a, b = max(-HALF, z0 - h2 * r), min(HALF, z0 + h2 * r)
    if b <= a:
        return 0.0
    pts = [z0]
    for t in (-r, -q, q, r):
        pts += [z0 - h2 * t, z0 - h1 * t, z0 - 1.0 / sigma - h1 * t]
    return _quad(integrand, a, b, pts, tol)


def bias_oracle(params: ModelParams, model: DispersalModel, k: Kernel, z0: float,
                bw: Bandwidths, tol: float = 1e-10) -> BiasOracle:
    """Exact mean of the normalised statistic: sigma n lam U + V, by quadrature.

    ``predictions`` holds the closed-form limits of U and V in the regimes
    where they apply ("u_large", "u_exact", "v_small").
    """
    if not 0 < params.sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    u = u_sigma(params, model, k, z0, bw, tol)
    v = v_sigma(params, model, k, z0, bw, tol)
    sigma, h1, h2 = params.sigma, bw.h1, bw.h2
    f0 = float(model.density(z0))
    pred = {}
    if sigma * h2 >= 8 and h1 <= h2 / 8:
        pred["u_large"] = f0 / (sigma * h2)
    if 4 <= h1 < 1 / sigma and h2 <= h1 / 4 and h1 + h2 < 1 / sigma and sigma < 0.25:
        pred["u_exact"] = 1.0 / h1
    if h2 <= h1 / 4 and h1 + h2 < 1 / sigma:
        pred["v_small"] = f0 / h1
    expected = sigma * params.n * params.lam * u + v
    return BiasOracle(u, v, expected, pred)


def v_bound(k: Kernel, model: DispersalModel, h1: float) -> float:
    """|V| <= ||K||_1 ||K'||_1 ||f||_inf / h1."""
    from .kernels import l1_norm

    r = k.support_radius
    pts = [p for p in (-k.flat_radius, 0.0, k.flat_radius) if -r < p < r]
    grid = np.linspace(-HALF, HALF, 20001)
    f_inf = float(np.max(model.density(grid)))
    return l1_norm(k.value, r, pts) * l1_norm(k.derivative, r, pts) * f_inf / h1
