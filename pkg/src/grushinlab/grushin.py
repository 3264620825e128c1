"""Bi-radial finite differences for the Grushin operator.

For ``u = u(|x|, |y|)`` on ``R^N x R^k`` with ``r = |x|`` and ``s = |y|``,

    Delta_G u = u_rr + (N-1)/r u_r + r**2 (u_ss + (k-1)/s u_s).

Nodes sit at cell centres, so the axes ``r = 0`` and ``s = 0`` are never
evaluated; the ghost cell across an axis mirrors the first interior cell,
and across the outer radius it carries the negated value (zero at the face).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import integrate
from scipy.stats import qmc


@dataclass(frozen=True)
class GrushinDims:
    N: int
    k: int

    def __post_init__(self):
        if self.N < 1 or self.k < 1:
            raise ValueError(f"N and k must be >= 1, got N={self.N}, k={self.k}")

    @property
    def Q(self) -> int:
        """Homogeneous dimension ``N + 2k``."""
        return self.N + 2 * self.k


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in ``R^d`` (2 for ``d = 1``)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class BiRadialGrid:
    dims: GrushinDims
    r_max: float
    s_max: float
    n_r: int
    n_s: int

    def __post_init__(self):
        if self.n_r < 8 or self.n_s < 8:
            raise ValueError("need at least 8 cells per direction")
        if self.r_max < 4 or self.s_max < 4:
            raise ValueError("truncation radii must be at least 4")

    @property
    def h_r(self) -> float:
        return self.r_max / self.n_r

    @property
    def h_s(self) -> float:
        return self.s_max / self.n_s

    @property
    def r(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.h_r

    @property
    def s(self) -> np.ndarray:
        return (np.arange(self.n_s) + 0.5) * self.h_s

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_s)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r, self.s, indexing="ij")

    def cell_measure(self) -> np.ndarray:
        """Weights of the bi-radial measure at each node (midpoint rule)."""
        N, k = self.dims.N, self.dims.k
        wr = sphere_area(N) * self.r ** (N - 1) * self.h_r
        ws = sphere_area(k) * self.s ** (k - 1) * self.h_s
        return np.outer(wr, ws)

    def sample(self, func) -> "Field":
        R, S = self.mesh()
        return Field(self, np.asarray(func(R, S), dtype=float))


@dataclass
class Field:
    grid: BiRadialGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self.grid, other.grid)
        return Field(self.grid, self.values + other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, scalar * self.values)

    __rmul__ = __mul__


def _same_grid(a: BiRadialGrid, b: BiRadialGrid) -> None:
    if a != b:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class OperatorMatrix:
    grid: BiRadialGrid
    matrix: sp.csr_matrix = field(repr=False)


def _radial_1d(n: int, h: float, dim: int) -> sp.csr_matrix:
    """Tridiagonal ``d2/dr2 + (dim-1)/r d/dr``: mirrored at 0, zero face value at the far end."""
    r = (np.arange(n) + 0.5) * h
    east = 1.0 / h**2 + (dim - 1) / (2.0 * r * h)
    west = 1.0 / h**2 - (dim - 1) / (2.0 * r * h)
    centre = np.full(n, -2.0 / h**2)
    centre[0] += west[0]
    centre[-1] -= east[-1]
    return sp.diags([west[1:], centre, east[:-1]], [-1, 0, 1], format="csr")


def assemble(grid: BiRadialGrid) -> OperatorMatrix:
    """Sparse discrete ``Delta_G`` on ``grid`` (row index ``i * n_s + j``)."""
    Dr = _radial_1d(grid.n_r, grid.h_r, grid.dims.N)
    Ds = _radial_1d(grid.n_s, grid.h_s, grid.dims.k)
    L = sp.kron(Dr, sp.identity(grid.n_s)) + sp.kron(sp.diags(grid.r**2), Ds)
    return OperatorMatrix(grid, L.tocsr())


def apply(op: OperatorMatrix, u: Field) -> Field:
    _same_grid(op.grid, u.grid)
    return Field(u.grid, op.matrix @ u.values.ravel())


def interior_mask(grid: BiRadialGrid) -> np.ndarray:
    """Nodes whose stencil does not reach the outer Dirichlet faces."""
    mask = np.ones(grid.shape, dtype=bool)
    mask[-1, :] = False
    mask[:, -1] = False
    return mask


# ---------------------------------------------------------------------------
# comparison function


@dataclass(frozen=True)
class ThetaParams:
    """``Theta(r, s) = c * exp(-epsilon * sqrt(A + r**4 + s**2))``."""

    epsilon: float
    A: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0 or self.A <= 0 or self.c <= 0:
            raise ValueError("epsilon, A and c must be positive")

    @classmethod
    def default(cls, dims: GrushinDims, A: float = 1.0, normalize: bool = False) -> "ThetaParams":
        eps = 1.0 / (2 * (dims.N + 2) + dims.k)
        params = cls(eps, A, 1.0)
        if normalize:
            params = cls(eps, A, 1.0 / theta_mass(params, dims))
        return params

    def bound_constant(self, dims: GrushinDims) -> float:
        return self.epsilon * (2 * (dims.N + 2) + dims.k)


def theta_eval(params: ThetaParams, r, s):
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    return params.c * np.exp(-params.epsilon * np.sqrt(params.A + r**4 + s**2))


def grushin_theta_analytic(params: ThetaParams, dims: GrushinDims, r, s):
    """Exact ``Delta_G Theta`` at ``(|x|, |y|) = (r, s)``.

    With ``rho = A + r**4 + s**2``,
    ``(eps rho**-1.5 + eps**2 / rho) (16 r**6 + 4 r**2 s**2) Theta / 4
    - eps (2(N+2) + k) r**2 rho**-0.5 Theta``.
    """
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    eps = params.epsilon
    rho = params.A + r**4 + s**2
    theta = theta_eval(params, r, s)
    grad2 = 16 * r**6 + 4 * r**2 * s**2
    first = 0.25 * (eps * rho**-1.5 + eps**2 / rho) * grad2 * theta
    second = params.bound_constant(dims) * r**2 / np.sqrt(rho) * theta
    return first - second


def theta_inequality_margin(params: ThetaParams, dims: GrushinDims, samples: int, seed: int = 20250101, box: float = 20.0) -> float:
    """Minimum of ``Delta_G Theta + eps (2(N+2)+k) Theta`` over scrambled-Sobol points in ``[0, box]**2``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sampler = qmc.Sobol(d=2, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(samples)))
    pts = sampler.random_base2(m)[:samples] * box
    r, s = pts[:, 0], pts[:, 1]
    lhs = grushin_theta_analytic(params, dims, r, s)
    margin = lhs + params.bound_constant(dims) * theta_eval(params, r, s)
    return float(np.min(margin))


def theta_mass(params: ThetaParams, dims: GrushinDims) -> float:
    """``int Theta dz`` over ``R^{N+k}`` by nested adaptive quadrature."""

    def inner(r):
        val, _ = integrate.quad(
            lambda s: s ** (dims.k - 1) * math.exp(-params.epsilon * math.sqrt(params.A + r**4 + s * s)),
            0,
            np.inf,
            epsrel=1e-12,
            limit=200,
        )
        return r ** (dims.N - 1) * val

    outer, _ = integrate.quad(inner, 0, np.inf, epsrel=1e-11, limit=200)
    return params.c * sphere_area(dims.N) * sphere_area(dims.k) * outer


def biradial_integral(u: Field) -> float:
    """Midpoint-rule integral of a bi-radial field over ``R^{N+k}``."""
    return float(np.sum(u.values * u.grid.cell_measure()))


def quadratic_form(op: OperatorMatrix, u: Field) -> float:
    """``<u, L u>`` in the plain nodal inner product."""
    v = u.values.ravel()
    return float(v @ (op.matrix @ v))
