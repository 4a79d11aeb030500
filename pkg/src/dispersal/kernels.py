"""Smoothing kernels with value, derivative and antiderivative evaluators."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special


@dataclass(frozen=True)
class Kernel:
    """A symmetric smoothing kernel.

    ``antiderivative(z)`` is the integral of ``value`` from -inf to z.
    ``flat_radius`` is the half-width of the region where ``value`` equals 1
    exactly; windowed estimators count points there instead of evaluating K.
    """

    name: str
    value: Callable
    derivative: Callable
    antiderivative: Callable
    order: int
    support_radius: float
    fourier: Optional[Callable] = None
    differentiable: bool = True
    flat_radius: float = 0.0

    @property
    def bounded_support(self) -> bool:
        return math.isfinite(self.support_radius)

    def scaled(self, z, h):
        """K_h(z) = K(z / h) / h."""
        return self.value(np.asarray(z, dtype=float) / h) / h


# ---------------------------------------------------------------------------
# the smooth compactly supported kernel: 1 on |z| <= 1/4, then a quartic taper

_Q = 0.25
_R = 23.0 / 32.0
_SLOPE = 32.0 / 15.0


def _paper_value(z):
    a = np.abs(np.asarray(z, dtype=float))
    u = _SLOPE * (a - _Q)
    taper = (u * u - 1.0) ** 2
    return np.where(a <= _Q, 1.0, np.where(a <= _R, taper, 0.0))


def _paper_derivative(z):
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    u = _SLOPE * (a - _Q)
    d = 4.0 * _SLOPE * u * (u * u - 1.0) * np.sign(z)
    return np.where((a > _Q) & (a <= _R), d, 0.0)


def _paper_antiderivative(z):
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    u = np.clip(_SLOPE * (a - _Q), 0.0, 1.0)
    taper = (u**5 / 5.0 - 2.0 * u**3 / 3.0 + u) / _SLOPE
    half_mass = np.where(a <= _Q, a, _Q + taper)
    return 0.5 + np.sign(z) * half_mass


def paper_kernel() -> Kernel:
    return Kernel(
        name="paper",
        value=_paper_value,
        derivative=_paper_derivative,
        antiderivative=_paper_antiderivative,
        order=1,
        support_radius=_R,
        flat_radius=_Q,
    )


def rect_kernel() -> Kernel:
    """Indicator of [-1/2, 1/2]; not differentiable, its derivative is reported as 0."""
    return Kernel(
        name="rect",
        value=lambda z: np.where(np.abs(np.asarray(z, dtype=float)) <= 0.5, 1.0, 0.0),
        derivative=lambda z: np.zeros_like(np.asarray(z, dtype=float)),
        antiderivative=lambda z: np.clip(np.asarray(z, dtype=float) + 0.5, 0.0, 1.0),
        order=1,
        support_radius=0.5,
        differentiable=False,
        flat_radius=0.5,
    )


# ---------------------------------------------------------------------------
# band-limited kernel with Fourier transform (1 - u^2)^3 on [-1, 1]
#
# K(x) = (1/pi) int_0^1 cos(ux) (1-u^2)^3 du = 48 j_3(x) / (pi x^3),
# K'(x) = -48 x j_4(x) / (pi x^4), with j_n the spherical Bessel functions.

_SERIES_CUT = 0.5


def _jn_over_xn(n: int, x):
    """j_n(x) / x^n, using the power series near 0 where the ratio loses precision."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    small = ax < _SERIES_CUT
    out = np.empty_like(x)
    xs = x[small]
    t = -0.5 * xs * xs
    term = np.full(xs.shape, 1.0 / special.factorial2(2 * n + 1, exact=True))
    acc = term.copy()
    for k in range(1, 12):
        term = term * t / (k * (2 * n + 2 * k + 1))
        acc = acc + term
    out[small] = acc
    xl = x[~small]
    out[~small] = special.spherical_jn(n, xl) / xl**n
    return out


def _bl_value(z):
    return 48.0 / math.pi * _jn_over_xn(3, z)


def _bl_derivative(z):
    z = np.asarray(z, dtype=float)
    return -48.0 / math.pi * z * _jn_over_xn(4, z)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(512)
_GL_U = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS * (1.0 - _GL_U**2) ** 3


def _bl_antiderivative(z):
    # 1/2 + (1/pi) int_0^1 (1-u^2)^3 sin(uz)/u du; accurate for |z| up to a few hundred.
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    out = np.empty(flat.shape)
    for start in range(0, flat.size, 4096):
        chunk = flat[start:start + 4096]
        s = np.sin(np.outer(chunk, _GL_U)) / _GL_U
        out[start:start + 4096] = 0.5 + (s @ _GL_W) / math.pi
    return out.reshape(z.shape)


def _bl_fourier(u):
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) <= 1.0, (1.0 - u * u) ** 3, 0.0)


def bandlimited_kernel() -> Kernel:
    return Kernel(
        name="bandlimited",
        value=_bl_value,
        derivative=_bl_derivative,
        antiderivative=_bl_antiderivative,
        order=1,
        support_radius=math.inf,
        fourier=_bl_fourier,
    )


KERNELS = {"paper": paper_kernel, "rect": rect_kernel, "bandlimited": bandlimited_kernel}


def get_kernel(name: str) -> Kernel:
    try:
        return KERNELS[name]()
    except KeyError:
        raise ValueError(f"unknown kernel {name!r}; choose from {sorted(KERNELS)}") from None


# ---------------------------------------------------------------------------

class KernelOrderError(AssertionError):
    pass


def _breakpoints(k: Kernel):
    pts = [0.0]
    if k.flat_radius > 0:
        pts += [-k.flat_radius, k.flat_radius]
    return pts


def kernel_moment(k: Kernel, ell: int, bound: float = 200.0) -> float:
    """int z^ell K(z) dz by adaptive quadrature (over [-bound, bound] for unbounded kernels)."""
    def fn(z):
        return z**ell * float(k.value(z))

    if k.bounded_support:
        r = k.support_radius
        pts = sorted({p for p in _breakpoints(k) if -r < p < r})
        val, _ = integrate.quad(fn, -r, r, points=pts, epsabs=1e-13, epsrel=1e-13, limit=200)
        return val
    # unbounded: integrate piecewise over unit-ish cells to follow the oscillations
    edges = np.linspace(-bound, bound, int(4 * bound) + 1)
    return float(sum(integrate.quad(fn, a, b, epsabs=1e-14, epsrel=1e-12)[0] for a, b in zip(edges[:-1], edges[1:])))


def verify_order(k: Kernel, max_order: int, tol: float = 1e-8) -> list:
    """Moments 0..max_order; raises KernelOrderError when moments 1..order are not ~0."""
    moments = [kernel_moment(k, ell) for ell in range(max_order + 1)]
    bad = [ell for ell in range(1, min(k.order, max_order) + 1) if abs(moments[ell]) > tol]
    if bad:
        raise KernelOrderError(f"kernel {k.name}: moments {bad} exceed {tol:g}: {moments}")
    return moments


def l1_norm(fn: Callable, radius: float, points=()) -> float:
    val, _ = integrate.quad(lambda z: abs(float(fn(z))), -radius, radius, points=list(points) or None, limit=200)
    return val
