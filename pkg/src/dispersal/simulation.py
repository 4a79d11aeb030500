"""Simulators for the Cox, one-to-one and i.i.d.-pairs observation models,
plus analytic first and second cross-moments used as test oracles.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from .model import HALF, DispersalModel, ModelParams, PointClouds

UINT64 = 2**64


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based seed: the child stream is a hash of (master_seed, stream_id)."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < UINT64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "SeedSpec":
        return SeedSpec(self.master_seed, stream_id)


@dataclass(frozen=True)
class CoxPrimitives:
    """The sigma-free random inputs of one Cox realisation.

    Offspring positions are ``repeat(parents, counts) + sigma * displacements``,
    so one set of primitives yields coupled clouds along a whole sigma grid.
    """

    parents: np.ndarray
    counts: np.ndarray
    displacements: np.ndarray

    def realize(self, sigma: float) -> PointClouds:
        owner = np.repeat(np.arange(self.parents.size), self.counts)
        y = self.parents[owner] + sigma * self.displacements
        return PointClouds.from_unsorted(self.parents, y, owner, check_parent_range=False)


def _parent_draw(rng, size, parent):
    if parent is None:
        return rng.random(size)
    return np.asarray(parent.sample(rng, size), dtype=float)


def draw_cox_primitives(params: ModelParams, model: DispersalModel, seed: SeedSpec,
                        *, parent_rate: Optional[float] = None, parent=None) -> CoxPrimitives:
    rng = seed.rng()
    rate = params.n * params.lam if parent_rate is None else parent_rate
    k = int(rng.poisson(rate))
    x = _parent_draw(rng, k, parent)
    counts = rng.poisson(params.mu, size=k)
    d = model.quantile(rng.random(int(counts.sum())))
    return CoxPrimitives(x, counts, np.asarray(d, dtype=float))


def sample_cox(params: ModelParams, model: DispersalModel, seed: SeedSpec,
               *, parent_rate: Optional[float] = None, parent=None) -> PointClouds:
    """Poisson(n lambda) uniform parents, each emitting Poisson(mu) children at X + sigma D.

    ``parent`` optionally replaces the uniform parent law with any object
    exposing ``sample(rng, size)``; ``parent_rate`` overrides the expected
    number of parents (diagnostics only, e.g. 0).
    """
    prims = draw_cox_primitives(params, model, seed, parent_rate=parent_rate, parent=parent)
    return prims.realize(params.sigma)


@dataclass(frozen=True)
class CoxBatch:
    """Many independent Cox replicates stored flat, each point tagged with its replicate."""

    replicates: int
    parents: np.ndarray
    parent_rep: np.ndarray
    offspring: np.ndarray
    offspring_rep: np.ndarray

    def counts_in(self, interval, which: str = "offspring") -> np.ndarray:
        """Per-replicate number of points in the closed interval."""
        pts, rep = (self.offspring, self.offspring_rep) if which == "offspring" else (self.parents, self.parent_rep)
        inside = (pts >= interval[0]) & (pts <= interval[1])
        return np.bincount(rep[inside], minlength=self.replicates)


def sample_cox_batch(params: ModelParams, model: DispersalModel, seed: SeedSpec, replicates: int) -> CoxBatch:
    """``replicates`` Cox draws from a single stream; much faster than one stream per replicate
    when only window counts are needed (moment checks)."""
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    rng = seed.rng()
    k = rng.poisson(params.n * params.lam, size=replicates)
    parent_rep = np.repeat(np.arange(replicates), k)
    x = rng.random(parent_rep.size)
    counts = rng.poisson(params.mu, size=x.size)
    owner = np.repeat(np.arange(x.size), counts)
    d = np.asarray(model.quantile(rng.random(owner.size)), dtype=float)
    return CoxBatch(replicates, x, parent_rep, x[owner] + params.sigma * d, parent_rep[owner])


def sample_one_to_one(params: ModelParams, model: DispersalModel, seed: SeedSpec,
                      *, parent_rate: Optional[float] = None, sigma: Optional[float] = None) -> PointClouds:
    """Exactly one child per parent; ``sigma`` may be overridden (0 allowed) for diagnostics."""
    rng = seed.rng()
    rate = params.n * params.lam if parent_rate is None else parent_rate
    sig = params.sigma if sigma is None else sigma
    k = int(rng.poisson(rate))
    x = rng.random(k)
    d = model.quantile(rng.random(k))
    return PointClouds.from_unsorted(x, x + sig * np.asarray(d, dtype=float), np.arange(k))


def sample_iid_pairs(n: int, sigma: float, model: DispersalModel, seed: SeedSpec) -> PointClouds:
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed.rng()
    x = rng.random(n)
    d = model.quantile(rng.random(n))
    return PointClouds.from_unsorted(x, x + sigma * np.asarray(d, dtype=float), np.arange(n))


# ---------------------------------------------------------------------------
# moment oracles

@dataclass(frozen=True)
class MomentQuery:
    A: tuple
    B: tuple

    def __post_init__(self):
        a0, a1 = self.A
        b0, b1 = self.B
        if not (0 <= a0 <= a1 <= 1):
            raise ValueError(f"A must be an interval inside [0, 1], got {self.A}")
        if not (np.isfinite(b0) and np.isfinite(b1) and b0 <= b1):
            raise ValueError(f"B must be a bounded interval, got {self.B}")


def _quad(fn, a, b, points, tol):
    if b <= a:
        return 0.0
    pts = sorted({p for p in points if a < p < b})
    val, err = integrate.quad(fn, a, b, points=pts or None, epsabs=tol, epsrel=0.0, limit=500)
    if err > tol:
        raise QuadratureError(f"quadrature on [{a}, {b}] reached only {err:.3g} (target {tol:g})")
    return val


def _mass(model, sigma, x, b):
    """P(x + sigma D in [b0, b1])."""
    return model.cdf((b[1] - x) / sigma) - model.cdf((b[0] - x) / sigma)


def _kinks(sigma, *intervals):
    pts = []
    for b0, b1 in intervals:
        for e in (b0, b1):
            pts += [e - sigma * HALF, e, e + sigma * HALF]
    return pts


def q_sigma(model: DispersalModel, sigma: float, A, B, tol: float = 1e-9) -> float:
    """Q_sigma(A, B) = int_A int_B f_sigma(y - x) dy dx.

    The inner integral is a CDF difference; the outer one is adaptive quadrature
    with breakpoints where the integrand has kinks.
    """
    lo, hi = max(A[0], B[0] - sigma * HALF), min(A[1], B[1] + sigma * HALF)
    return _quad(lambda x: float(_mass(model, sigma, x, B)), lo, hi, _kinks(sigma, B), tol)


def q2_sigma(model: DispersalModel, sigma: float, A, B1, B2, tol: float = 1e-9) -> float:
    """Q^2_sigma(A, B1, B2) = int_A P(x + sigma D in B1) P(x + sigma D' in B2) dx."""
    lo = max(A[0], B1[0] - sigma * HALF, B2[0] - sigma * HALF)
    hi = min(A[1], B1[1] + sigma * HALF, B2[1] + sigma * HALF)
    return _quad(
        lambda x: float(_mass(model, sigma, x, B1) * _mass(model, sigma, x, B2)),
        lo, hi, _kinks(sigma, B1, B2), tol,
    )


def expected_N(params: ModelParams, model: DispersalModel, B, tol: float = 1e-9) -> float:
    return params.n * params.lam * params.mu * q_sigma(model, params.sigma, (0.0, 1.0), B, tol)


def expected_MN(params: ModelParams, model: DispersalModel, q: MomentQuery, tol: float = 1e-9) -> float:
    """E[M(A) N(B)] = (n lam)^2 mu |A| Q([0,1], B) + n lam mu Q(A, B)."""
    nl = params.n * params.lam
    area = q.A[1] - q.A[0]
    full = q_sigma(model, params.sigma, (0.0, 1.0), q.B, tol)
    local = q_sigma(model, params.sigma, q.A, q.B, tol)
    return nl * nl * params.mu * area * full + nl * params.mu * local


def expected_NN(params: ModelParams, model: DispersalModel, B1, B2, tol: float = 1e-9) -> float:
    """E[N(B1) N(B2)] for disjoint B1, B2: product of means plus n lam mu^2 Q^2."""
    if B1[0] > B1[1] or B2[0] > B2[1]:
        raise ValueError("intervals must satisfy lo <= hi")
    empty = B1[0] == B1[1] or B2[0] == B2[1]
    if not empty and max(B1[0], B2[0]) < min(B1[1], B2[1]):
        raise ValueError(f"B1={B1} and B2={B2} overlap")
    mean1 = expected_N(params, model, B1, tol)
    mean2 = expected_N(params, model, B2, tol)
    q2 = q2_sigma(model, params.sigma, (0.0, 1.0), B1, B2, tol)
    return mean1 * mean2 + params.n * params.lam * params.mu**2 * q2


def count_in(points: np.ndarray, interval) -> int:
    """Number of sorted ``points`` inside the closed interval."""
    return int(np.searchsorted(points, interval[1], "right") - np.searchsorted(points, interval[0], "left"))
