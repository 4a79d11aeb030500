"""Spectral deconvolution for parent laws whose characteristic function never vanishes."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .kernels import Kernel
from .model import ModelParams, PointClouds
from .point_estimators import TheoryRangeWarning


class IllPosedError(ValueError):
    pass


@dataclass(frozen=True)
class Mild:
    t: float


@dataclass(frozen=True)
class Severe:
    gamma: float
    beta: float


@dataclass(frozen=True)
class ParentDistribution:
    """Parent law on the real line: density, characteristic function and a sampler."""

    name: str
    density: Callable
    char_fn: Callable
    illposedness: object
    sampler: Callable = field(repr=False, compare=False)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.asarray(self.sampler(rng, size), dtype=float)


def laplace_parent(b: float = 0.1, loc: float = 0.5) -> ParentDistribution:
    if b <= 0:
        raise ValueError("Laplace scale b must be positive")
    return ParentDistribution(
        name=f"laplace:b={b:g}",
        density=lambda x: np.exp(-np.abs(np.asarray(x, dtype=float) - loc) / b) / (2 * b),
        char_fn=lambda u: np.exp(1j * loc * np.asarray(u, dtype=float)) / (1 + (b * np.asarray(u, dtype=float)) ** 2),
        illposedness=Mild(2.0),
        sampler=lambda rng, size: rng.laplace(loc, b, size),
    )


def gaussian_parent(s: float = 0.1, loc: float = 0.5) -> ParentDistribution:
    if s <= 0:
        raise ValueError("Gaussian scale s must be positive")
    return ParentDistribution(
        name=f"gaussian:s={s:g}",
        density=lambda x: np.exp(-0.5 * ((np.asarray(x, dtype=float) - loc) / s) ** 2) / (s * math.sqrt(2 * math.pi)),
        char_fn=lambda u: np.exp(1j * loc * np.asarray(u, dtype=float) - 0.5 * (s * np.asarray(u, dtype=float)) ** 2),
        illposedness=Severe(s * s / 2, 2.0),
        sampler=lambda rng, size: rng.normal(loc, s, size),
    )


def identity_parent(loc: float = 0.0) -> ParentDistribution:
    """Point mass at ``loc``; with loc = 0 deconvolution is the identity. Diagnostics only."""
    return ParentDistribution(
        name="identity",
        density=lambda x: np.where(np.asarray(x, dtype=float) == loc, np.inf, 0.0),
        char_fn=lambda u: np.exp(1j * loc * np.asarray(u, dtype=float)),
        illposedness=Mild(0.0),
        sampler=lambda rng, size: np.full(size, float(loc)),
    )


PARENTS = {"laplace": laplace_parent, "gaussian": gaussian_parent, "identity": identity_parent}


def parse_parent(spec: str) -> ParentDistribution:
    """Parse ``name[:key=value,...]``, e.g. ``laplace:b=0.1``."""
    name, _, rest = spec.partition(":")
    name = name.strip().lower()
    if name == "uniform":
        raise ValueError("uniform parent has a characteristic function with zeros; spectral deconvolution does not apply")
    if name not in PARENTS:
        raise ValueError(f"unknown parent {name!r}; choose from {sorted(PARENTS)}")
    kwargs = {}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        kwargs[key.strip()] = float(val)
    return PARENTS[name](**kwargs)


@dataclass(frozen=True)
class SpectralConfig:
    quadrature_nodes: int = 4096
    min_charfn_modulus: float = 1e-12
    cap_small_modulus: bool = False

    def __post_init__(self):
        if self.quadrature_nodes < 64:
            raise ValueError("quadrature_nodes must be at least 64")
        if self.min_charfn_modulus <= 0:
            raise ValueError("min_charfn_modulus must be positive")


@dataclass(frozen=True)
class SpectralWeights:
    """Trapezoid nodes u_k and weights c_k so that w(x) = sum_k c_k exp(-i u_k x)."""

    u: np.ndarray
    coef: np.ndarray
    capped: bool

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a, b = self.coef.real, self.coef.imag
        real = np.empty(x.shape)
        imag = np.empty(x.shape)
        flat_x, flat_r, flat_i = x.ravel(), real.reshape(-1), imag.reshape(-1)
        step = max(1, (1 << 21) // self.u.size)
        for s in range(0, flat_x.size, step):
            ph = np.outer(flat_x[s:s + step], self.u)
            c, sn = np.cos(ph), np.sin(ph)
            flat_r[s:s + step] = c @ a + sn @ b
            flat_i[s:s + step] = c @ b - sn @ a
        return real, imag


@lru_cache(maxsize=64)
def _weights_cached(kernel: Kernel, parent: ParentDistribution, h1: float, sigma: float,
                    cfg: SpectralConfig) -> SpectralWeights:
    m = cfg.quadrature_nodes
    u = np.linspace(-1.0 / h1, 1.0 / h1, m)
    du = u[1] - u[0]
    trap = np.full(m, du)
    trap[[0, -1]] = du / 2
    phi = np.asarray(parent.char_fn(u / sigma), dtype=complex)
    mod = np.abs(phi)
    bad = mod < cfg.min_charfn_modulus
    capped = False
    if bad.any():
        if not cfg.cap_small_modulus:
            worst = u[np.argmin(mod)]
            raise IllPosedError(
                f"|phi_p(u/sigma)| = {mod.min():.3g} < {cfg.min_charfn_modulus:g} at u = {worst:.6g}"
            )
        phase = np.exp(1j * np.angle(phi))  # complex division overflows on subnormal phi
        phi = np.where(bad, cfg.min_charfn_modulus * phase, phi)
        capped = True
    coef = trap * np.asarray(kernel.fourier(h1 * u), dtype=float) / phi / (2 * math.pi)
    return SpectralWeights(u, coef, capped)


def spectral_weights(k: Kernel, parent: ParentDistribution, h1: float, sigma: float,
                     cfg: SpectralConfig = SpectralConfig()) -> SpectralWeights:
    if k.fourier is None:
        raise ValueError(f"kernel {k.name!r} has no Fourier transform; use a band-limited kernel")
    return _weights_cached(k, parent, float(h1), float(sigma), cfg)


def spectral_deconv(clouds: PointClouds, params: ModelParams, parent: ParentDistribution, k: Kernel,
                    z0: float, h1: float, cfg: SpectralConfig = SpectralConfig()) -> float:
    """(1 / (n lam mu)) sum_j w(z0 - Y_j / sigma), w = F^{-1}[FK(h1 u) / phi_p(u / sigma)]."""
    w = spectral_weights(k, parent, h1, params.sigma, cfg)
    if w.capped:
        warnings.warn("characteristic function modulus capped; estimate is regularised", TheoryRangeWarning)
    y = clouds.offspring
    if y.size == 0:
        return 0.0
    real, imag = w(z0 - y / params.sigma)
    total, total_im = float(real.sum()), float(imag.sum())
    scale = float(np.abs(real).sum())
    if abs(total_im) > 1e-8 * max(scale, 1e-300):
        raise ArithmeticError(f"inverse transform is not real: imaginary part {total_im:.3g} vs {scale:.3g}")
    return total / (params.n * params.lam * params.mu)


def spectral_bandwidth(params: ModelParams, s: float, parent: ParentDistribution) -> float:
    if s <= 0:
        raise ValueError("s must be positive")
    n, sigma = params.n, params.sigma
    ill = parent.illposedness
    if isinstance(ill, Mild):
        t = ill.t
        return float((n * sigma ** (2 * t - 1)) ** (-1.0 / (2 * s + 2 * t + 1)))
    return float(((math.log(n) / (4 * ill.gamma)) ** (-1.0 / ill.beta)) / sigma)
