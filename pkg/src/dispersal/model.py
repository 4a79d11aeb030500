"""Shared domain types: dispersal models, model parameters and point clouds."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

HALF = 0.5


def bisect_quantile(cdf: Callable, p, lo: float = -HALF, hi: float = HALF, tol: float = 1e-12):
    """Vectorised inverse of a nondecreasing ``cdf`` on ``[lo, hi]`` by bisection."""
    p = np.asarray(p, dtype=float)
    a = np.full(p.shape, lo)
    b = np.full(p.shape, hi)
    n_iter = int(np.ceil(np.log2((hi - lo) / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (a + b)
        below = cdf(mid) < p
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class DispersalModel:
    """A dispersal density supported in [-1/2, 1/2].

    ``density`` and ``cdf`` are vectorised callables. ``quantile`` maps uniforms
    to draws and is what the simulators use, so that a fixed stream of uniforms
    always produces the same displacements.
    """

    name: str
    density: Callable
    cdf: Callable
    quantile: Optional[Callable] = None
    char_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.quantile is None:
            object.__setattr__(self, "quantile", lambda p: bisect_quantile(self.cdf, p))

    def sampler(self, rng: np.random.Generator, size=None):
        return self.quantile(rng.random(size))

    def mean(self) -> float:
        val, _ = integrate.quad(lambda z: z * float(self.density(z)), -HALF, HALF, limit=200)
        return val


def _beta23_density(z):
    z = np.asarray(z, dtype=float)
    inside = np.abs(z) <= HALF
    return np.where(inside, 12.0 * (HALF + z) * (HALF - z) ** 2, 0.0)


def _beta23_cdf(z):
    x = np.clip(np.asarray(z, dtype=float) + HALF, 0.0, 1.0)
    return x * x * (6.0 - 8.0 * x + 3.0 * x * x)


def _beta23_char_fn(u):
    # E[exp(iuD)] for D = B - 1/2, B ~ Beta(2, 3); numerically via quadrature.
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u.shape, dtype=complex)
    for k, uk in enumerate(u):
        re, _ = integrate.quad(lambda z: np.cos(uk * z) * _beta23_density(z), -HALF, HALF)
        im, _ = integrate.quad(lambda z: np.sin(uk * z) * _beta23_density(z), -HALF, HALF)
        out[k] = re + 1j * im
    return out


def make_beta23_model() -> DispersalModel:
    """Beta(2, 3) shifted by -1/2: f(z) = 12 (1/2 + z)(1/2 - z)^2 on [-1/2, 1/2]."""
    return DispersalModel(
        name="beta23",
        density=_beta23_density,
        cdf=_beta23_cdf,
        char_fn=_beta23_char_fn,
    )


def make_uniform_model() -> DispersalModel:
    return DispersalModel(
        name="uniform",
        density=lambda z: np.where(np.abs(np.asarray(z, dtype=float)) <= HALF, 1.0, 0.0),
        cdf=lambda z: np.clip(np.asarray(z, dtype=float) + HALF, 0.0, 1.0),
        quantile=lambda p: np.asarray(p, dtype=float) - HALF,
        char_fn=lambda u: np.sinc(np.asarray(u, dtype=float) / (2 * np.pi)).astype(complex),
    )


def model_from_density(name: str, density: Callable, grid_size: int = 20001) -> DispersalModel:
    """Wrap a density without closed-form CDF.

    The CDF is the cumulative trapezoid rule on ``grid_size`` equispaced nodes,
    linearly interpolated; its error is O(grid spacing^2) for smooth densities
    (about 1e-9 at the default size).
    """
    grid = np.linspace(-HALF, HALF, grid_size)
    vals = np.asarray(density(grid), dtype=float)
    cum = integrate.cumulative_trapezoid(vals, grid, initial=0.0)
    total = cum[-1]
    if total > 0:
        cum = cum / total

    def cdf(z):
        return np.interp(np.asarray(z, dtype=float), grid, cum, left=0.0, right=1.0)

    return DispersalModel(name=name, density=density, cdf=cdf)


@dataclass
class ModelReport:
    integral: float
    max_density: float
    support_ok: bool
    cdf_ok: bool
    sample_mean: float
    sample_se: float
    quad_mean: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_model(model: DispersalModel, n_draws: int = 100_000, seed: int = 0) -> ModelReport:
    """Numerical sanity checks of a dispersal model; violations are reported, not raised."""
    violations = []
    integral, _ = integrate.quad(lambda z: float(model.density(z)), -HALF, HALF, limit=200, epsabs=1e-12)
    if abs(integral - 1.0) > 1e-8:
        violations.append(f"density integrates to {integral:.12g}, not 1")

    grid = np.linspace(-1.0, 1.0, 4001)
    dens = np.asarray(model.density(grid), dtype=float)
    max_density = float(dens.max())
    outside = np.abs(grid) > HALF
    support_ok = bool(np.all(dens[outside] == 0.0)) and bool(np.all(dens >= 0.0))
    if not support_ok:
        violations.append("density negative or nonzero outside [-1/2, 1/2]")

    cdf_vals = np.asarray(model.cdf(grid), dtype=float)
    cdf_ok = (
        bool(np.all(np.diff(cdf_vals) >= -1e-15))
        and abs(float(model.cdf(-HALF))) <= 1e-12
        and abs(float(model.cdf(HALF)) - 1.0) <= 1e-12
    )
    if not cdf_ok:
        violations.append("cdf not a distribution function on [-1/2, 1/2]")

    draws = model.sampler(np.random.default_rng(seed), n_draws)
    sample_mean = float(draws.mean())
    sample_se = float(draws.std(ddof=1) / np.sqrt(n_draws))
    if np.any(np.abs(draws) > HALF):
        violations.append("sampler draws outside [-1/2, 1/2]")
    quad_mean = model.mean() / integral if integral > 0 else float("nan")
    if not np.isfinite(quad_mean) or abs(sample_mean - quad_mean) > 3 * sample_se:
        violations.append(f"sample mean {sample_mean:.5f} vs quadrature mean {quad_mean:.5f}")

    return ModelReport(integral, max_density, support_ok, cdf_ok, sample_mean, sample_se, quad_mean, violations)


@dataclass(frozen=True)
class ModelParams:
    n: int
    lam: float = 1.0
    mu: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0 < self.sigma <= 1:
            raise ValueError(f"sigma must lie in (0, 1], got {self.sigma}")

    def with_sigma(self, sigma: float) -> "ModelParams":
        return ModelParams(self.n, self.lam, self.mu, sigma)

    def to_dict(self) -> dict:
        return {"n": self.n, "lambda": self.lam, "mu": self.mu, "sigma": self.sigma}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(int(d["n"]), float(d.get("lambda", d.get("lam", 1.0))), float(d["mu"]), float(d["sigma"]))


@dataclass(frozen=True, eq=False)
class PointClouds:
    """Parent and offspring positions, both sorted ascending.

    ``parentage[j]`` is the index (into the sorted parents) of the true parent
    of offspring ``j``; only simulators know it.
    """

    parents: np.ndarray
    offspring: np.ndarray
    parentage: Optional[np.ndarray] = None

    def __post_init__(self):
        parents = np.asarray(self.parents, dtype=float).ravel()
        offspring = np.asarray(self.offspring, dtype=float).ravel()
        if np.any(np.diff(parents) < 0) or np.any(np.diff(offspring) < 0):
            raise ValueError("positions must be sorted; use PointClouds.from_unsorted")
        if parents.size and (parents[0] < 0 or parents[-1] > 1):
            raise ValueError("parents must lie in [0, 1]")
        parentage = self.parentage
        if parentage is not None:
            parentage = np.asarray(parentage, dtype=np.int64).ravel()
            if parentage.size != offspring.size:
                raise ValueError("parentage must have one entry per offspring")
            if parentage.size and (parentage.min() < 0 or parentage.max() >= parents.size):
                raise ValueError("parentage index out of range")
            parentage.setflags(write=False)
        parents.setflags(write=False)
        offspring.setflags(write=False)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "offspring", offspring)
        object.__setattr__(self, "parentage", parentage)

    @classmethod
    def from_unsorted(cls, parents, offspring, parentage=None, check_parent_range: bool = True) -> "PointClouds":
        parents = np.asarray(parents, dtype=float).ravel()
        offspring = np.asarray(offspring, dtype=float).ravel()
        p_order = np.argsort(parents, kind="stable")
        o_order = np.argsort(offspring, kind="stable")
        if parentage is not None:
            rank = np.empty(parents.size, dtype=np.int64)
            rank[p_order] = np.arange(parents.size)
            parentage = rank[np.asarray(parentage, dtype=np.int64)[o_order]]
        if check_parent_range:
            return cls(parents[p_order], offspring[o_order], parentage)
        return _unchecked(parents[p_order], offspring[o_order], parentage)

    @property
    def n_parents(self) -> int:
        return int(self.parents.size)

    @property
    def n_offspring(self) -> int:
        return int(self.offspring.size)

    def __eq__(self, other):
        if not isinstance(other, PointClouds):
            return NotImplemented
        same_parentage = (self.parentage is None and other.parentage is None) or (
            self.parentage is not None
            and other.parentage is not None
            and np.array_equal(self.parentage, other.parentage)
        )
        return (
            np.array_equal(self.parents, other.parents)
            and np.array_equal(self.offspring, other.offspring)
            and same_parentage
        )

    __hash__ = None


def _unchecked(parents, offspring, parentage) -> PointClouds:
    # Parents outside [0, 1] occur for non-uniform parent distributions.
    obj = object.__new__(PointClouds)
    for name, arr in (("parents", parents), ("offspring", offspring)):
        arr = np.asarray(arr, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(obj, name, arr)
    if parentage is not None:
        parentage = np.asarray(parentage, dtype=np.int64)
        parentage.setflags(write=False)
    object.__setattr__(obj, "parentage", parentage)
    return obj


@dataclass(frozen=True)
class EvalPoint:
    z0: float

    @property
    def interior(self) -> bool:
        return -HALF < self.z0 < HALF
