"""Rescaled cutoff test functions and the scaling of the weak-form right-hand sides.

The cutoffs are quintic smoothsteps, so every integrand is piecewise
polynomial in the scaled variable.  Each right-hand-side term is a product of
one-dimensional integrals (``|x|``, ``|y|`` and ``t``), evaluated by adaptive
quadrature in physical variables with the bi-radial measure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .fraccalc import WeightW1, lemma26_int9
from .grushin import GrushinDims, sphere_area


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested accuracy."""


# ---------------------------------------------------------------------------
# profiles


def smoothstep(x):
    """``10 x**3 - 15 x**4 + 6 x**5`` clamped to ``[0, 1]``, with two derivatives."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    s = x**3 * (10 - 15 * x + 6 * x**2)
    d1 = 30 * x**2 * (1 - x) ** 2
    d2 = 60 * x * (1 - x) * (1 - 2 * x)
    return s, d1, d2


@dataclass(frozen=True)
class CutoffProfile:
    """Nonincreasing C^2 cutoff: 1 on ``(-inf, plateau]``, 0 on ``[support, inf)``."""

    plateau: float = 1.0
    support: float = 2.0

    def __post_init__(self):
        if not self.support > self.plateau:
            raise ValueError("support must exceed plateau")

    @property
    def width(self) -> float:
        return self.support - self.plateau

    @property
    def derivative_bounds(self) -> tuple[float, float]:
        """Sup of ``|first|`` and ``|second|`` derivative (quintic maxima 15/8 and 10/sqrt(3))."""
        return 15.0 / 8.0 / self.width, 10.0 / math.sqrt(3.0) / self.width**2


PHI = CutoffProfile(1.0, 2.0)
ETA = CutoffProfile(0.5, 1.0)


def phi_derivatives(profile: CutoffProfile, xi):
    """``(value, first, second)`` of the cutoff at ``xi``; arrays broadcast."""
    xi = np.asarray(xi, dtype=float)
    x = (xi - profile.plateau) / profile.width
    s, d1, d2 = smoothstep(x)
    inside = (x > 0) & (x < 1)
    first = np.where(inside, -d1 / profile.width, 0.0)
    second = np.where(inside, -d2 / profile.width**2, 0.0)
    value = 1.0 - s
    if value.ndim == 0:
        return float(value), float(first), float(second)
    return value, first, second


@dataclass(frozen=True)
class TestFunctionFamily:
    """``ell = 2p/(p-1)`` and the conjugate exponent ``p' = p/(p-1)``."""

    __test__ = False

    p: float

    def __post_init__(self):
        if self.p <= 1:
            raise ValueError("p must exceed 1")

    @property
    def conj(self) -> float:
        return self.p / (self.p - 1)

    @property
    def ell(self) -> float:
        return 2.0 * self.conj


# ---------------------------------------------------------------------------
# one-dimensional factors


def _quad(func, a: float, b: float, points=None) -> float:
    val, err = integrate.quad(func, a, b, points=points, epsabs=0.0, epsrel=1e-11, limit=400)
    if not math.isfinite(val) or err > 1e-8 * max(abs(val), 1e-300):
        raise QuadratureError(f"quadrature on [{a}, {b}] reached only {err:.3g} (value {val:.6g})")
    return val


def _radial(func, dim: int, scale: float) -> float:
    """``int_{R^dim} func(|x| / scale) dx`` for integrands supported in ``|x| <= 2 scale``."""
    inner = _quad(lambda r: func(r / scale) * r ** (dim - 1), 0.0, scale)
    outer = _quad(lambda r: func(r / scale) * r ** (dim - 1), scale, 2.0 * scale)
    return sphere_area(dim) * (inner + outer)


def _grad_pow(dim: int, scale: float, q: float) -> float:
    """``int |grad Phi(|x|/L)|**q dx``."""
    return _radial(lambda xi: abs(phi_derivatives(PHI, xi)[1] / scale) ** q if 1 < xi < 2 else 0.0, dim, scale)


def _lap_pow(dim: int, scale: float, q: float, lead: float) -> float:
    """``int Phi**lead |Delta Phi(|x|/L)|**q dx``."""

    def f(xi):
        if not 1 < xi < 2:
            return 0.0
        v, d1, d2 = phi_derivatives(PHI, xi)
        lap = d2 / scale**2 + (dim - 1) / (xi * scale) * d1 / scale
        return v**lead * abs(lap) ** q

    return _radial(f, dim, scale)


def _mass(dim: int, scale: float, ell: float, weight_pow: float = 0.0) -> float:
    """``int |x|**weight_pow Phi(|x|/L)**ell dx``."""
    return _radial(lambda xi: (xi * scale) ** weight_pow * phi_derivatives(PHI, xi)[0] ** ell, dim, scale)


# ---------------------------------------------------------------------------
# right-hand sides


def weak_rhs_T1(T: float, p: float, dims: GrushinDims) -> tuple[float, tuple[float, float, float, float, float]]:
    """The five cutoff integrals bounding the local-reaction weak form (unit constants).

    Test function ``Phi(|x|/T**0.5)**l Phi(|y|/T)**l eta(t/T)**l``; returns
    the sum and the terms in the order: time derivative, ``|grad_x|``,
    ``Delta_x``, ``|x| |grad_y|``, ``|x| Delta_y``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    fam = TestFunctionFamily(p)
    q, ell = fam.conj, fam.ell
    N, k = dims.N, dims.k
    Lx, Ly = math.sqrt(T), T

    def time_dt(t):
        v, d1, _ = phi_derivatives(ETA, t / T)
        return v**q * abs(d1 / T) ** q

    t_dt = _quad(time_dt, 0.5 * T, T)
    t_mass = _quad(lambda t: phi_derivatives(ETA, t / T)[0] ** ell, 0.0, T, points=[0.5 * T])

    x_mass = _mass(N, Lx, ell)
    y_mass = _mass(k, Ly, ell)
    x_grad = _grad_pow(N, Lx, 2 * q)
    x_lap = _lap_pow(N, Lx, q, lead=q)
    x_weighted = _mass(N, Lx, ell, weight_pow=2 * q)
    y_grad = _grad_pow(k, Ly, 2 * q)
    y_lap = _lap_pow(k, Ly, q, lead=q)

    terms = (
        t_dt * x_mass * y_mass,
        t_mass * y_mass * x_grad,
        t_mass * y_mass * x_lap,
        t_mass * x_weighted * y_grad,
        t_mass * x_weighted * y_lap,
    )
    return float(sum(terms)), terms


def spatial_factors_T2(R: float, p: float, dims: GrushinDims) -> tuple[float, float]:
    """``(mass, derivative group)`` of the spatial cutoff at scale ``R``."""
    fam = TestFunctionFamily(p)
    q, ell = fam.conj, fam.ell
    N, k = dims.N, dims.k
    Lx, Ly = math.sqrt(R), R
    x_mass = _mass(N, Lx, ell)
    y_mass = _mass(k, Ly, ell)
    x_weighted = _mass(N, Lx, ell, weight_pow=2 * q)
    group = (
        y_mass * _grad_pow(N, Lx, 2 * q)
        + y_mass * _lap_pow(N, Lx, q, lead=q)
        + x_weighted * _grad_pow(k, Ly, 2 * q)
        + x_weighted * _lap_pow(k, Ly, q, lead=q)
    )
    return x_mass * y_mass, group


def weak_rhs_T2(T: float, R: float, p: float, gamma: float, dims: GrushinDims) -> tuple[float, float]:
    """The two aggregate groups bounding the memory weak form (unit constants).

    The time factors are the closed forms for ``(1 - t/T)_+**l`` with
    fractional orders ``1 + alpha`` (first group) and ``alpha``
    (second group), ``alpha = 1 - gamma``.
    """
    if T < 1 or R < 1:
        raise ValueError("T and R must be >= 1")
    alpha = 1.0 - gamma
    fam = TestFunctionFamily(p)
    w = WeightW1(T, sigma=fam.ell)
    time_a, _ = lemma26_int9(w, 1, alpha, p)
    time_b, _ = lemma26_int9(w, 0, alpha, p)
    mass, group = spatial_factors_T2(R, p, dims)
    return time_a * mass, time_b * group


def expected_slope_T1(p: float, dims: GrushinDims) -> float:
    return -TestFunctionFamily(p).conj + dims.N / 2 + dims.k + 1


def expected_slope_T2(p: float, gamma: float, dims: GrushinDims) -> float:
    """Slope in ``T`` of both groups along ``R = T``."""
    return 1 - (2 - gamma) * TestFunctionFamily(p).conj + dims.N / 2 + dims.k


def fit_slope(xs, ys) -> float:
    """Least-squares slope of ``log ys`` against ``log xs``."""
    return float(np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0])


def critical_exponents(dims: GrushinDims, gamma: float) -> tuple[float, float, float]:
    """``(p_c1, p_0, p_c2)`` with ``p_c2 = max(p_0, 1/gamma)`` (``1/0 = inf``)."""
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must lie in [0, 1)")
    Q = dims.Q
    p_c1 = 1.0 + 2.0 / Q
    p_0 = 1.0 + 2.0 * (2.0 - gamma) / (Q - 2.0 + 2.0 * gamma)
    inv = math.inf if gamma == 0 else 1.0 / gamma
    return p_c1, p_0, max(p_0, inv)


def write_slope_rows(rows, path) -> None:
    """Rows of ``(T, R, p, gamma, term, value, slope_window)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T", "R", "p", "gamma", "term", "value", "slope_window"])
        for T, R, p, g, term, value, window in rows:
            w.writerow(["%.17g" % T, "%.17g" % R, "%.17g" % p, "%.17g" % g, term, "%.17g" % value, window])
