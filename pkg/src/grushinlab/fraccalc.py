"""Riemann-Liouville fractional integrals and derivatives on sampled data.

Sampled functions are treated as piecewise linear between nodes, and the
weakly singular kernel ``(t - s)**(alpha - 1)`` is integrated exactly on
each subinterval (product integration).  The closed forms for the power
weight ``w1(t) = (1 - t/T)_+**sigma`` are evaluated directly and come with
brute-force quadrature oracles (``numeric_*``) that never touch the closed
forms they are used to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an identity."""


class ContractError(ValueError):
    """Raised when two inputs that must share a grid do not."""


def gamma_ratio(a: float, b: float) -> float:
    """Return ``Gamma(a) / Gamma(b)`` for positive ``a`` and ``b``.

    Evaluated through log-gamma so that large shape parameters do not
    overflow.
    """
    if a <= 0 or b <= 0:
        raise DomainError(f"gamma_ratio needs positive arguments, got {a}, {b}")
    return math.exp(math.lgamma(a) - math.lgamma(b))


@dataclass(frozen=True)
class FracOrder:
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"fractional order must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class TimeGrid:
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise DomainError("a time grid needs at least 3 nodes")
        if not np.all(np.isfinite(nodes)) or np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be finite and strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, c: float, d: float, count: int) -> "TimeGrid":
        return cls(np.linspace(c, d, count))

    @property
    def c(self) -> float:
        return float(self.nodes[0])

    @property
    def d(self) -> float:
        return float(self.nodes[-1])

    def __eq__(self, other):
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return self.nodes.shape == other.nodes.shape and bool(np.all(self.nodes == other.nodes))

    def __hash__(self):
        return hash(self.nodes.tobytes())


@dataclass(frozen=True)
class SampledFunction:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.nodes.shape:
            raise ContractError("values must align with the grid nodes")
        if not np.all(np.isfinite(values)):
            raise DomainError("sampled values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, grid: TimeGrid, func) -> "SampledFunction":
        return cls(grid, np.asarray(func(grid.nodes), dtype=float))

    def reflected(self) -> "SampledFunction":
        """Mirror about the interval midpoint, ``s -> c + d - s``."""
        g = self.grid
        return SampledFunction(TimeGrid(g.c + g.d - g.nodes[::-1]), self.values[::-1])


def default_sigma(m: int, alpha: float, p: float) -> float:
    """Smallest integer exponent (at least 12) keeping every weight integral finite."""
    return float(max(12, math.ceil(2 * (m + alpha) * p / (p - 1) + 2)))


@dataclass(frozen=True)
class WeightW1:
    """The time weight ``(1 - t/T)_+**sigma``."""

    T: float
    sigma: float = field(default=12.0)

    def __post_init__(self):
        if self.T <= 0:
            raise DomainError("T must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip(1.0 - t / self.T, 0.0, None) ** self.sigma


# ---------------------------------------------------------------------------
# product integration


def _product_weights(nodes: np.ndarray, t: float, alpha: float) -> tuple[np.ndarray, float | None]:
    """Weights ``q`` with ``int_c^t (t-s)**(alpha-1) f(s) ds = q @ f_nodes`` for piecewise-linear ``f``.

    If ``t`` falls strictly inside a cell, the trailing partial cell needs the
    interpolated value ``f(t)``; its weight is returned separately.
    """
    k = int(np.searchsorted(nodes, t, side="right"))  # nodes[:k] <= t
    q = np.zeros(nodes.size)
    s = nodes[:k]
    if s[-1] < t:
        ends = np.append(s, t)
    else:
        ends = s
    # distances from t, decreasing along the cells
    b = t - ends[:-1]
    a = t - ends[1:]
    h = b - a
    m0 = (b**alpha - a**alpha) / alpha
    m1 = (b ** (alpha + 1) - a ** (alpha + 1)) / (alpha + 1)
    # int over cell of kernel * (s - s_left)/h  and  * (s_right - s)/h
    right = (b * m0 - m1) / h
    left = m0 - right
    ncell = b.size
    q[:ncell] += left
    tail_weight = None
    if s[-1] < t:
        q[1:ncell] += right[:-1]
        tail_weight = float(right[-1])
    else:
        q[1 : ncell + 1] += right
    return q, tail_weight


def rl_left_integral(f: SampledFunction, alpha: FracOrder | float, t: float) -> float:
    r"""Left Riemann-Liouville integral :math:`I^\alpha_{c|t} f(t)`.

    ``f`` is taken piecewise linear between its nodes; the kernel is
    integrated exactly on every cell.
    """
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    nodes = f.grid.nodes
    if not (f.grid.c < t <= f.grid.d):
        raise DomainError(f"t={t} outside ({f.grid.c}, {f.grid.d}]")
    q, tail = _product_weights(nodes, t, a)
    total = float(q @ f.values)
    if tail is not None:
        total += tail * float(np.interp(t, nodes, f.values))
    return total / math.gamma(a)


def rl_left_integral_nodes(f: SampledFunction, alpha: FracOrder | float) -> np.ndarray:
    """``rl_left_integral`` evaluated at every node (0 at the left endpoint)."""
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    nodes = f.grid.nodes
    out = np.zeros(nodes.size)
    for i in range(1, nodes.size):
        q, _ = _product_weights(nodes[: i + 1], nodes[i], a)
        out[i] = q @ f.values[: i + 1]
    return out / math.gamma(a)


def rl_right_integral(f: SampledFunction, alpha: FracOrder | float, t: float) -> float:
    r"""Right integral :math:`I^\alpha_{t|d} f(t)`, by reflection of the left one."""
    g = f.grid
    if not (g.c <= t < g.d):
        raise DomainError(f"t={t} outside [{g.c}, {g.d})")
    return rl_left_integral(f.reflected(), alpha, g.c + g.d - t)


def rl_right_integral_nodes(f: SampledFunction, alpha: FracOrder | float) -> np.ndarray:
    return rl_left_integral_nodes(f.reflected(), alpha)[::-1]


def _step(grid: TimeGrid) -> float:
    return max(1e-6, 1e-4 * (grid.d - grid.c))


def rl_left_derivative(f: SampledFunction, alpha: FracOrder | float, t: float, h: float | None = None) -> float:
    r"""Left Riemann-Liouville derivative :math:`D^\alpha_{c|t} f = \frac{d}{dt} I^{1-\alpha}_{c|t} f`.

    Computed with a central difference of step ``h`` (by default
    ``max(1e-6, 1e-4 (d - c))``).  Differentiability of the fractional
    integral at ``t`` is the caller's responsibility.
    """
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    h = _step(f.grid) if h is None else h
    if t - h <= f.grid.c or t + h > f.grid.d:
        raise DomainError(f"difference stencil at t={t} leaves ({f.grid.c}, {f.grid.d}]")
    plus = rl_left_integral(f, 1.0 - a, t + h)
    minus = rl_left_integral(f, 1.0 - a, t - h)
    return (plus - minus) / (2 * h)


def rl_right_derivative(f: SampledFunction, alpha: FracOrder | float, t: float, h: float | None = None) -> float:
    r""":math:`D^\alpha_{t|d} f = -\frac{d}{dt} I^{1-\alpha}_{t|d} f`, central difference."""
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    h = _step(f.grid) if h is None else h
    if t - h < f.grid.c or t + h >= f.grid.d:
        raise DomainError(f"difference stencil at t={t} leaves [{f.grid.c}, {f.grid.d})")
    plus = rl_right_integral(f, 1.0 - a, t + h)
    minus = rl_right_integral(f, 1.0 - a, t - h)
    return -(plus - minus) / (2 * h)


def rl_left_derivative_nodes(f: SampledFunction, alpha: FracOrder | float) -> np.ndarray:
    """Left derivative at every node via a second-order gradient of the nodal integral."""
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    integral = rl_left_integral_nodes(f, 1.0 - a)
    return np.gradient(integral, f.grid.nodes, edge_order=2)


def rl_right_derivative_nodes(f: SampledFunction, alpha: FracOrder | float) -> np.ndarray:
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    integral = rl_right_integral_nodes(f, 1.0 - a)
    return -np.gradient(integral, f.grid.nodes, edge_order=2)


# ---------------------------------------------------------------------------
# closed forms for the power weight


def rl_right_derivative_w1(t, w: WeightW1, m: int, alpha: FracOrder | float):
    r"""Closed form of :math:`D^{m+\alpha}_{t|T} w_1(t)`.

    .. math::

        \frac{\Gamma(\sigma+1)}{\Gamma(\sigma+1-m-\alpha)} T^{-(m+\alpha)}
        (1 - t/T)^{\sigma-\alpha-m}

    Accepts scalars or arrays in ``[0, T]``.
    """
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    if m < 0:
        raise DomainError("m must be a nonnegative integer")
    expo = w.sigma - a - m
    if expo <= -1:
        raise DomainError(f"sigma - alpha - m = {expo} must exceed -1")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr > w.T) or np.any(t_arr < 0):
        raise DomainError(f"t must lie in [0, T={w.T}]")
    coef = gamma_ratio(w.sigma + 1, w.sigma + 1 - m - a) * w.T ** (-(m + a))
    with np.errstate(divide="ignore"):
        out = coef * (1.0 - t_arr / w.T) ** expo
    return float(out) if np.ndim(out) == 0 else out


def lemma26_int9(w: WeightW1, m: int, alpha: FracOrder | float, p: float) -> tuple[float, float]:
    """Weighted integral ``int_0^T w1**(-1/(p-1)) |D^{m+alpha} w1|**(p/(p-1)) dt``.

    Returns ``(value, constant)`` with ``value = constant * T**(1 - (m+alpha) p')``.
    """
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    if p <= 1:
        raise DomainError("p must exceed 1")
    pp = p / (p - 1)
    if not w.sigma > (p * (a + m - 1) + 1) / (p - 1):
        raise DomainError(f"sigma={w.sigma} too small for m={m}, alpha={a}, p={p}")
    if w.sigma - m - a <= -1:
        raise DomainError("sigma - m - alpha must exceed -1")
    const = gamma_ratio(w.sigma + 1, w.sigma + 1 - m - a) ** pp / (w.sigma - (m + a) * pp + 1)
    return const * w.T ** (1 - (m + a) * pp), const


def lemma26_int8(w: WeightW1, m: int, alpha: FracOrder | float) -> tuple[float, float]:
    """Plain integral ``int_0^T D^{m+alpha} w1 dt`` of the closed form.

    Returns ``(value, constant)``; ``constant = Gamma(sigma+1)/Gamma(sigma+2-m-alpha)``
    and the integral scales as ``T**(1 - (m+alpha))``.
    """
    a = alpha.alpha if isinstance(alpha, FracOrder) else float(alpha)
    if w.sigma - m - a <= -1:
        raise DomainError("sigma - m - alpha must exceed -1")
    const = gamma_ratio(w.sigma + 1, w.sigma + 2 - m - a)
    return const * w.T ** (1 - (m + a)), const


# ---------------------------------------------------------------------------
# residual checks


def ibp_residual(
    f: SampledFunction,
    g: SampledFunction,
    alpha: FracOrder | float,
    right_derivative_f: np.ndarray | None = None,
) -> float:
    r"""Residual of fractional integration by parts.

    ``|int f D^alpha_{c|t} g - int g D^alpha_{t|d} f|`` by the composite
    trapezoid rule.  Both derivatives are computed at the nodes from the
    product-integration fractional integrals unless the right derivative of
    ``f`` is supplied in closed form.
    """
    if f.grid != g.grid:
        raise ContractError("f and g must share a grid")
    nodes = f.grid.nodes
    if not np.any(f.values):
        return 0.0
    left = rl_left_derivative_nodes(g, alpha)
    right = rl_right_derivative_nodes(f, alpha) if right_derivative_f is None else np.asarray(right_derivative_f)
    lhs = integrate.trapezoid(f.values * left, nodes)
    rhs = integrate.trapezoid(g.values * right, nodes)
    return float(abs(lhs - rhs))


def check_int4_identity(w: WeightW1, alpha: FracOrder | float, grid: TimeGrid) -> float:
    """Max residual of ``-(d/dt) D^alpha w1 = D^{1+alpha} w1`` over interior nodes.

    The time derivative is a second-order central difference on ``grid``, so
    the residual is the stencil's truncation error.
    """
    nodes = grid.nodes
    if nodes[0] < 0 or nodes[-1] > w.T:
        raise DomainError("grid must lie inside [0, T]")
    d0 = rl_right_derivative_w1(nodes, w, 0, alpha)
    d1 = rl_right_derivative_w1(nodes, w, 1, alpha)
    lhs = -np.gradient(d0, nodes)
    return float(np.max(np.abs(lhs[1:-1] - d1[1:-1])))


def check_inversion(g: SampledFunction, alpha: FracOrder | float, window: tuple[float, float] = (0.1, 0.9)) -> float:
    """Max of ``|D^alpha I^alpha g - g|`` over nodes in a relative window of the interval.

    ``I^alpha g`` is sampled on the nodes with product integration, then
    differentiated with :func:`rl_left_derivative` at each node in the window.
    """
    grid = g.grid
    f = SampledFunction(grid, rl_left_integral_nodes(g, alpha))
    lo = grid.c + window[0] * (grid.d - grid.c)
    hi = grid.c + window[1] * (grid.d - grid.c)
    idx = np.nonzero((grid.nodes >= lo) & (grid.nodes <= hi))[0]
    errs = [abs(rl_left_derivative(f, alpha, grid.nodes[i]) - g.values[i]) for i in idx]
    return float(max(errs))


# ---------------------------------------------------------------------------
# quadrature oracles


def numeric_right_integral(func, alpha: float, t: float, d: float) -> float:
    """Adaptive quadrature of ``I^alpha_{t|d} func`` using an algebraic weight."""
    if t >= d:
        return 0.0
    val, _ = integrate.quad(func, t, d, weight="alg", wvar=(alpha - 1.0, 0.0), epsabs=0, epsrel=1e-13, limit=200)
    return val / math.gamma(alpha)


def numeric_right_derivative_w1(t: float, w: WeightW1, m: int, alpha: float, h: float | None = None) -> float:
    r"""Brute-force :math:`D^{m+\alpha}_{t|T} w_1` from its definition.

    ``(-1)**(m+1) d^{m+1}/dt^{m+1} I^{1-alpha}_{t|T} w1`` with the integral by
    adaptive quadrature and the derivative by a five-point (fourth-order)
    stencil.  The weight is extended smoothly by ``(1 - t/T)**sigma`` to the
    left of 0 so the stencil may straddle ``t = 0``.
    """
    h = 2e-3 * w.T if h is None else h

    def weight(s):
        return (1.0 - s / w.T) ** w.sigma

    def J(tt):
        return numeric_right_integral(weight, 1.0 - alpha, tt, w.T)

    vals = [J(t + k * h) for k in (-2, -1, 0, 1, 2)]
    if m == 0:
        deriv = (vals[0] - 8 * vals[1] + 8 * vals[3] - vals[4]) / (12 * h)
    elif m == 1:
        deriv = (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)
    else:
        raise DomainError("numeric oracle supports m in {0, 1}")
    return (-1) ** (m + 1) * deriv


def numeric_weighted_integral(w: WeightW1, m: int, alpha: float, p: float) -> float:
    """Adaptive quadrature of the weighted integrand, built from ``w1`` and the pointwise closed form."""
    pp = p / (p - 1)

    def integrand(t):
        return w(t) ** (-1.0 / (p - 1)) * abs(rl_right_derivative_w1(t, w, m, alpha)) ** pp

    val, _ = integrate.quad(integrand, 0.0, w.T, epsabs=0, epsrel=1e-13, limit=200)
    return val


def numeric_plain_integral(w: WeightW1, m: int, alpha: float) -> float:
    val, _ = integrate.quad(lambda t: rl_right_derivative_w1(t, w, m, alpha), 0.0, w.T, epsabs=0, epsrel=1e-13, limit=200)
    return val
