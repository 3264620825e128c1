"""Time integration of the Grushin heat equation with nonlinear memory.

    u_t - Delta_G u = kappa1 int_0^t (t-s)**(-gamma) |u|**(p1-1) u(s) ds + kappa2 |u|**(p2-1) u

on a bi-radial grid.  Diffusion is implicit (backward Euler), the two
nonlinear terms are explicit.  The memory integral uses product integration
with a piecewise-constant density, either summed exactly over the stored
history or compressed into decaying exponential modes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grushin import BiRadialGrid, Field, GrushinDims, assemble, biradial_integral

logger = logging.getLogger(__name__)

LEDGER_BYTE_LIMIT = 4 * 1024**3


class SolverError(RuntimeError):
    """Linear solve failed to converge."""


class LedgerError(ValueError):
    """Memory ledger used inconsistently, or too large to allocate."""


# ---------------------------------------------------------------------------
# kernel weights


def kernel_weights_from_steps(steps: np.ndarray, gamma: float) -> np.ndarray:
    """Product-integration weights for a piecewise-constant density.

    ``steps[j] = t_{j+1} - t_j``; returns
    ``w_j = int_{t_j}^{t_{j+1}} (t_n - s)**(-gamma) ds`` for ``j < n``.
    Differences of powers are rewritten with ``expm1``/``log1p`` so that
    tiny early steps keep full relative accuracy at large lags.
    """
    steps = np.asarray(steps, dtype=float)
    e = 1.0 - gamma
    # lag from t_{j+1} to t_n
    after = np.zeros_like(steps)
    after[:-1] = np.cumsum(steps[::-1])[::-1][1:]
    w = np.empty_like(steps)
    far = after > 0
    w[far] = after[far] ** e * np.expm1(e * np.log1p(steps[far] / after[far])) / e
    w[~far] = steps[~far] ** e / e
    return w


def kernel_weights_from_times(times: np.ndarray, gamma: float) -> np.ndarray:
    """Weights at ``times[-1]`` for the history nodes ``times[:-1]``."""
    return kernel_weights_from_steps(np.diff(np.asarray(times, dtype=float)), gamma)


def kernel_weights(n: int, dt: float, gamma: float) -> np.ndarray:
    """Weights ``w_0 .. w_{n-1}`` on the uniform grid ``t_j = j dt``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must lie in [0, 1)")
    return kernel_weights_from_times(np.arange(n + 1) * dt, gamma)


def soe_modes(gamma: float, horizon: float, dt: float, modes: int | None = None, spacing: float = 0.4):
    """Rates and weights approximating ``t**(-gamma)`` by ``sum_m w_m exp(-lambda_m t)``.

    Trapezoidal rule in ``log(lambda)`` applied to
    ``t**(-gamma) = Gamma(gamma)**-1 int_0^inf lambda**(gamma-1) exp(-lambda t) d lambda``
    over ``[1e-3/horizon, 30 * 1024/dt]`` with an endpoint correction at the
    lower cut; the slice below it is folded into one extra slow mode.
    """
    if not (0.0 < gamma < 1.0):
        raise ValueError("exponential compression needs 0 < gamma < 1")
    lo = 1e-3 / horizon
    hi = 30.0 * 1024 / dt
    span = math.log(hi / lo)
    if modes is None:
        modes = int(math.ceil(span / spacing)) + 1
    if modes < 8:
        raise ValueError("at least 8 modes are required")
    x = np.linspace(math.log(lo), math.log(hi), modes - 1)
    h = x[1] - x[0]
    rates = np.exp(x)
    weights = h * rates**gamma / math.gamma(gamma)
    # the integrand in log(lambda) behaves like exp(gamma x) at the lower cut,
    # so the first Euler-Maclaurin correction is h**2 gamma / 12 there
    weights[0] *= 0.5 + h * gamma / 12.0
    weights[-1] *= 0.5
    tail_rate = lo * gamma / (gamma + 1.0)
    tail_weight = lo**gamma / (gamma * math.gamma(gamma))
    return np.append(tail_rate, rates), np.append(tail_weight, weights)


class ExactLedger:
    """Stores every accepted ``g_j = |u_j|**(p1-1) u_j`` and sums the exact weights."""

    def __init__(self, gamma: float, shape: tuple[int, ...], capacity: int = 64):
        capacity = max(int(capacity), 1)
        self.gamma = gamma
        self.shape = shape
        self.size = int(np.prod(shape))
        self.times: list[float] = []
        self.steps: list[float] = []
        self.count = 0
        if gamma == 0.0:
            # constant kernel: a running integral is exact
            self._running = np.zeros(self.size)
            self._last = None
        else:
            self._check_bytes(capacity)
            self._g = np.empty((capacity, self.size))

    def _check_bytes(self, capacity: int) -> None:
        if capacity * self.size * 8 > LEDGER_BYTE_LIMIT:
            raise LedgerError(
                f"exact memory ledger would need {capacity * self.size * 8 / 1024**3:.1f} GiB; "
                "use memory_mode='soe'"
            )

    def record(self, t: float, g: np.ndarray, step: float | None = None) -> None:
        """Append ``g`` at time ``t``; ``step`` overrides ``t - t_prev`` when ``t`` has lost resolution."""
        g = np.asarray(g, dtype=float).ravel()
        if self.count:
            self.steps.append(float(t - self.times[-1]) if step is None else float(step))
        if self.gamma == 0.0:
            if self._last is not None:
                self._running += self.steps[-1] * self._last
            self._last = g.copy()
        else:
            if self.count == self._g.shape[0]:
                new_cap = 2 * self._g.shape[0]
                self._check_bytes(new_cap)
                grown = np.empty((new_cap, self.size))
                grown[: self.count] = self._g[: self.count]
                self._g = grown
            self._g[self.count] = g
        self.times.append(float(t))
        self.count += 1

    def memory(self) -> np.ndarray:
        if self.count <= 1:
            return np.zeros(self.shape)
        if self.gamma == 0.0:
            return self._running.reshape(self.shape).copy()
        w = kernel_weights_from_steps(np.asarray(self.steps), self.gamma)
        return (w @ self._g[: self.count - 1]).reshape(self.shape)


class SOELedger:
    """Exponential-mode compression of the memory history.

    The most recent interval is integrated with the exact weight; older
    history lives in per-mode accumulators updated by one-step recurrences.
    """

    def __init__(self, gamma: float, shape: tuple[int, ...], rates: np.ndarray, weights: np.ndarray):
        if np.any(rates <= 0) or np.any(weights <= 0) or rates.size < 8:
            raise LedgerError("modes need positive rates and weights, and at least 8 of them")
        self.gamma = gamma
        self.shape = shape
        self.rates = np.asarray(rates, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        size = int(np.prod(shape))
        self._hist = np.zeros((self.rates.size, size))
        self.times: list[float] = []
        self._prev_g = None
        self._cur_g = None
        self.count = 0

    def record(self, t: float, g: np.ndarray) -> None:
        g = np.asarray(g, dtype=float).ravel().copy()
        if self.count >= 2:
            delta = self.times[-1] - self.times[-2]
            decay = np.exp(-self.rates * delta)
            gain = -np.expm1(-self.rates * delta) / self.rates
            self._hist *= decay[:, None]
            self._hist += gain[:, None] * self._prev_g[None, :]
        self._prev_g, self._cur_g = self._cur_g, g
        self.times.append(float(t))
        self.count += 1

    def memory(self) -> np.ndarray:
        if self.count <= 1:
            return np.zeros(self.shape)
        delta = self.times[-1] - self.times[-2]
        e = 1.0 - self.gamma
        local = delta**e / e * self._prev_g
        coef = self.weights * np.exp(-self.rates * delta)
        return (local + coef @ self._hist).reshape(self.shape)


class NullLedger:
    """Counts accepted steps when the memory coefficient is zero."""

    def __init__(self, shape: tuple[int, ...]):
        self.shape = shape
        self.times: list[float] = []
        self.count = 0

    def record(self, t: float, g: np.ndarray) -> None:
        self.times.append(float(t))
        self.count += 1

    def memory(self) -> np.ndarray:
        return np.zeros(self.shape)


def memory_term(ledger: ExactLedger | SOELedger, n: int) -> np.ndarray:
    """Memory integral at ``t_n`` from the ledger holding ``g_0 .. g_n``."""
    if ledger.count != n + 1:
        raise LedgerError(f"ledger holds {ledger.count} snapshots, expected {n + 1}")
    return ledger.memory()


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class InitialData:
    """Named bi-radial initial profiles.

    ``gaussian-bump``: ``amplitude * exp(-(r**2 + s**2) / width**2)``;
    ``plateau``: ``amplitude`` on ``r**2 + s**2 <= width**2``, zero outside;
    ``constant``: ``amplitude`` everywhere; ``zero``.
    """

    kind: Literal["gaussian-bump", "plateau", "constant", "zero"] = "gaussian-bump"
    amplitude: float = 1.0
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian-bump", "plateau", "constant", "zero"):
            raise ValueError(f"unknown initial profile {self.kind!r}")
        if self.width <= 0:
            raise ValueError("width must be positive")

    def sample(self, grid: BiRadialGrid) -> np.ndarray:
        R, S = grid.mesh()
        if self.kind == "gaussian-bump":
            return self.amplitude * np.exp(-(R**2 + S**2) / self.width**2)
        if self.kind == "plateau":
            return np.where(R**2 + S**2 <= self.width**2, self.amplitude, 0.0)
        if self.kind == "constant":
            return np.full(grid.shape, float(self.amplitude))
        return np.zeros(grid.shape)


@dataclass(frozen=True)
class GridSpec:
    r_max: float = 24.0
    s_max: float = 48.0
    n_r: int = 48
    n_s: int = 96

    def build(self, dims: GrushinDims) -> BiRadialGrid:
        return BiRadialGrid(dims, self.r_max, self.s_max, self.n_r, self.n_s)


@dataclass(frozen=True)
class SimConfig:
    dims: GrushinDims = GrushinDims(1, 1)
    grid: GridSpec = GridSpec()
    gamma: float = 0.5
    p1: float = 2.0
    p2: float = 2.0
    kappa1: float = 0.0
    kappa2: float = 1.0
    initial: InitialData = InitialData()
    dt: float = 0.01
    horizon: float = 10.0
    blowup_threshold: float = 1e10
    dt_min: float = 1e-12
    memory_mode: Literal["exact", "soe"] = "exact"
    soe_modes: int | None = None
    diffusion: bool = True
    linear_solver: Literal["direct", "krylov"] = "direct"
    adaptive: bool = True

    def __post_init__(self):
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError("gamma must lie in [0, 1)")
        if self.p1 <= 1 or self.p2 <= 1:
            raise ValueError("p1 and p2 must exceed 1")
        if not (0 < self.dt <= self.horizon):
            raise ValueError("need 0 < dt <= horizon")
        if self.memory_mode not in ("exact", "soe"):
            raise ValueError(f"unknown memory mode {self.memory_mode!r}")
        if self.linear_solver not in ("direct", "krylov"):
            raise ValueError(f"unknown linear solver {self.linear_solver!r}")
        sup0 = abs(self.initial.amplitude) if self.initial.kind != "zero" else 0.0
        if self.blowup_threshold <= sup0:
            raise ValueError("blow-up threshold must exceed the initial sup-norm")

    def make_grid(self) -> BiRadialGrid:
        return self.grid.build(self.dims)

    def make_ledger(self, shape: tuple[int, ...]):
        if self.kappa1 == 0.0:
            return NullLedger(shape)
        if self.memory_mode == "soe" and self.gamma > 0.0:
            rates, weights = soe_modes(self.gamma, self.horizon, self.dt, self.soe_modes)
            return SOELedger(self.gamma, shape, rates, weights)
        n_est = int(math.ceil(self.horizon / self.dt)) + 1
        size = int(np.prod(shape))
        if self.gamma > 0.0 and n_est * size * 8 > LEDGER_BYTE_LIMIT:
            raise LedgerError(
                f"exact memory for {n_est} steps x {size} nodes exceeds 4 GiB; use memory_mode='soe'"
            )
        return ExactLedger(self.gamma, shape, capacity=min(n_est, 1024))


# ---------------------------------------------------------------------------
# stepping


@dataclass
class FieldState:
    t: float
    u: np.ndarray
    ledger: ExactLedger | SOELedger
    step_index: int = 0


def power(u: np.ndarray, p: float) -> np.ndarray:
    """``|u|**(p-1) u``."""
    return np.abs(u) ** (p - 1) * u


class IMEXStepper:
    """``(I - dt L) u_{n+1} = u_n + dt (kappa1 M_n + kappa2 |u_n|**(p2-1) u_n)``.

    Factorizations of ``I - dt L`` are cached per step size.
    """

    def __init__(self, config: SimConfig, grid: BiRadialGrid | None = None):
        self.config = config
        self.grid = grid if grid is not None else config.make_grid()
        self.L = assemble(self.grid).matrix if config.diffusion else None
        self._solvers: dict[float, object] = {}

    def _solver(self, dt: float):
        solver = self._solvers.get(dt)
        if solver is None:
            n = self.grid.n_r * self.grid.n_s
            A = (sp.identity(n, format="csc") - dt * self.L).tocsc()
            if self.config.linear_solver == "direct":
                solver = spla.splu(A).solve
            else:
                ilu = spla.spilu(A, drop_tol=1e-6, fill_factor=10)
                M = spla.LinearOperator(A.shape, ilu.solve)

                def solver(rhs, A=A, M=M, n=n):
                    x, info = spla.bicgstab(A, rhs, x0=rhs, rtol=1e-10, atol=0.0, maxiter=10 * n, M=M)
                    if info != 0:
                        raise SolverError(f"bicgstab did not converge (info={info})")
                    return x

            self._solvers[dt] = solver
        return solver

    def forcing(self, state: FieldState) -> np.ndarray:
        cfg = self.config
        rhs = np.zeros_like(state.u)
        if cfg.kappa1 != 0.0:
            rhs += cfg.kappa1 * memory_term(state.ledger, state.step_index)
        if cfg.kappa2 != 0.0:
            rhs += cfg.kappa2 * power(state.u, cfg.p2)
        return rhs

    def advance(self, state: FieldState, dt: float) -> np.ndarray:
        """Trial value of ``u`` after one step of size ``dt``; does not touch the ledger."""
        rhs = (state.u + dt * self.forcing(state)).ravel()
        if self.L is None:
            return rhs.reshape(self.grid.shape)
        return self._solver(dt)(rhs).reshape(self.grid.shape)

    def accept(self, state: FieldState, u_new: np.ndarray, dt: float) -> FieldState:
        t_new = state.t + dt
        state.ledger.record(t_new, power(u_new, self.config.p1))
        return FieldState(t_new, u_new, state.ledger, state.step_index + 1)


def initial_state(config: SimConfig, grid: BiRadialGrid) -> FieldState:
    u0 = config.initial.sample(grid)
    ledger = config.make_ledger(grid.shape)
    ledger.record(0.0, power(u0, config.p1))
    return FieldState(0.0, u0, ledger, 0)


def step(state: FieldState, config: SimConfig, stepper: IMEXStepper | None = None, dt: float | None = None) -> FieldState:
    """One accepted IMEX step of size ``dt`` (default ``config.dt``)."""
    stepper = stepper if stepper is not None else IMEXStepper(config)
    dt = config.dt if dt is None else dt
    return stepper.accept(state, stepper.advance(state, dt), dt)


# ---------------------------------------------------------------------------
# runs


def norms(u: Field) -> tuple[float, float]:
    """``(sup |u|, int |u| dz)``."""
    return float(np.max(np.abs(u.values))), biradial_integral(Field(u.grid, np.abs(u.values)))


@dataclass
class Outcome:
    kind: Literal["BlownUp", "GlobalToHorizon", "Undecided"]
    t_star: float | None
    reason: str
    times: np.ndarray
    sup_norm: np.ndarray
    l1_norm: np.ndarray
    dts: np.ndarray
    final: Field | None = field(default=None, repr=False)

    @property
    def line(self) -> str:
        t = "nan" if self.t_star is None else repr(self.t_star)
        return f"OUTCOME {self.kind} {t}"


def _monotone_growth(sup: list[float], window: int = 10) -> bool:
    if len(sup) < window + 1:
        return False
    tail = np.asarray(sup[-(window + 1):])
    return bool(np.all(np.diff(tail) > 0))


def run(config: SimConfig, keep_final: bool = True) -> Outcome:
    """Integrate until the horizon, a threshold crossing, or step-size underflow.

    The step halves (and never grows back) whenever the sup-norm more than
    doubles in one step or the trial field is not finite.  Deterministic for
    a given configuration.
    """
    grid = config.make_grid()
    measure = grid.cell_measure()
    try:
        stepper = IMEXStepper(config, grid)
        state = initial_state(config, grid)
    except (LedgerError, SolverError) as exc:
        empty = np.zeros(0)
        return Outcome("Undecided", None, str(exc), empty, empty, empty, empty)

    times = [0.0]
    sups = [float(np.max(np.abs(state.u)))]
    l1s = [float(np.sum(np.abs(state.u) * measure))]
    dts = [0.0]
    dt = config.dt
    horizon = config.horizon
    kind, t_star, reason = "GlobalToHorizon", None, "reached horizon"

    def finish(kind, t_star, reason):
        return Outcome(
            kind,
            t_star,
            reason,
            np.asarray(times),
            np.asarray(sups),
            np.asarray(l1s),
            np.asarray(dts),
            Field(grid, np.nan_to_num(state.u)) if keep_final else None,
        )

    while state.t < horizon * (1 - 1e-12):
        h = min(dt, horizon - state.t)
        try:
            trial = stepper.advance(state, h)
        except SolverError as exc:
            return finish("Undecided", None, str(exc))
        sup_old = sups[-1]
        with np.errstate(over="ignore", invalid="ignore"):
            sup_new = float(np.max(np.abs(trial)))
        grew_too_fast = not math.isfinite(sup_new) or (config.adaptive and sup_old > 0 and sup_new > 2.0 * sup_old)
        if grew_too_fast:
            dt *= 0.5
            if dt < config.dt_min:
                if _monotone_growth(sups):
                    return finish("BlownUp", state.t, "step size underflow with monotone growth")
                return finish("Undecided", None, "step size underflow without monotone growth")
            continue
        state = stepper.accept(state, trial, h)
        times.append(state.t)
        sups.append(sup_new)
        l1s.append(float(np.sum(np.abs(trial) * measure)))
        dts.append(h)
        if sup_new > config.blowup_threshold:
            return finish("BlownUp", state.t, "sup-norm exceeded threshold")
    return finish(kind, t_star, reason)
