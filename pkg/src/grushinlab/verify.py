"""Fast numerical self-checks behind ``grushinlab verify``.

Each check returns one measured number compared against a tolerance; the
report has one line per check: ``<check-id> <measured> <tolerance> PASS|FAIL``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from . import fraccalc as fc
from . import grushin as gr
from . import memsolver as ms
from . import odereduce as od
from . import testfn as tf


@dataclass(frozen=True)
class Check:
    check_id: str
    module: str
    tolerance: float
    measure: Callable[[], float]
    sense: Literal["le", "ge"] = "le"

    def run(self, tol_scale: float = 1.0) -> "CheckResult":
        # only error bounds tighten; lower bounds such as convergence orders stay fixed
        tol = self.tolerance * tol_scale if self.sense == "le" else self.tolerance
        try:
            value = float(self.measure())
        except Exception as exc:  # noqa: BLE001 - a crashing check is a failing check
            return CheckResult(self.check_id, math.nan, tol, False, f"{type(exc).__name__}: {exc}")
        ok = value <= tol if self.sense == "le" else value >= tol
        return CheckResult(self.check_id, value, tol, bool(ok and math.isfinite(value)))


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    measured: float
    tolerance: float
    passed: bool
    note: str = ""

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.check_id} {self.measured:.6e} {self.tolerance:.6e} {status}"


# ---------------------------------------------------------------------------
# fraccalc


SIGMAS = (10.0, 14.0)
ORDERS = (0, 1)
ALPHAS = (0.25, 0.5, 0.75)


def right_derivative_error() -> float:
    worst = 0.0
    for sigma in SIGMAS:
        w = fc.WeightW1(2.0, sigma)
        for m in ORDERS:
            for a in ALPHAS:
                for t in (0.0, 0.5, 1.0):
                    exact = fc.rl_right_derivative_w1(t, w, m, a)
                    approx = fc.numeric_right_derivative_w1(t, w, m, a)
                    worst = max(worst, abs(approx / exact - 1))
    return worst


def weighted_integral_error(p: float = 2.0) -> float:
    worst = 0.0
    for sigma in SIGMAS:
        w = fc.WeightW1(1.0, sigma)
        for m in ORDERS:
            for a in ALPHAS:
                val, _ = fc.lemma26_int9(w, m, a, p)
                worst = max(worst, abs(fc.numeric_weighted_integral(w, m, a, p) / val - 1))
    return worst


def plain_integral_error() -> float:
    worst = 0.0
    for sigma in SIGMAS:
        w = fc.WeightW1(1.0, sigma)
        for m in ORDERS:
            for a in ALPHAS:
                val, _ = fc.lemma26_int8(w, m, a)
                worst = max(worst, abs(fc.numeric_plain_integral(w, m, a) / val - 1))
    return worst


def weighted_integral_scaling(p: float = 2.0) -> float:
    q = p / (p - 1)
    worst = 0.0
    for sigma in SIGMAS:
        for m in ORDERS:
            for a in ALPHAS:
                v1, _ = fc.lemma26_int9(fc.WeightW1(1.0, sigma), m, a, p)
                v2, _ = fc.lemma26_int9(fc.WeightW1(2.0, sigma), m, a, p)
                worst = max(worst, abs((v2 / v1) / 2.0 ** (1 - (m + a) * q) - 1))
    return worst


def plain_integral_scaling() -> float:
    """``T**(1 - m - alpha)``, the power obtained by integrating the closed-form derivative."""
    worst = 0.0
    for sigma in SIGMAS:
        for m in ORDERS:
            for a in ALPHAS:
                v1, _ = fc.lemma26_int8(fc.WeightW1(1.0, sigma), m, a)
                v4, _ = fc.lemma26_int8(fc.WeightW1(4.0, sigma), m, a)
                worst = max(worst, abs((v4 / v1) / 4.0 ** (1 - m - a) - 1))
    return worst


def inversion_error(nodes: int = 2048) -> float:
    grid = fc.TimeGrid.uniform(0.0, 1.0, nodes)
    worst = 0.0
    for func in (np.cos, np.exp, lambda t: np.sin(np.pi * t) ** 2):
        g = fc.SampledFunction.from_callable(grid, func)
        for a in ALPHAS:
            worst = max(worst, fc.check_inversion(g, a))
    return worst


def ibp_error(nodes: int = 2048) -> float:
    grid = fc.TimeGrid.uniform(0.0, 1.0, nodes)
    w = fc.WeightW1(1.0, 12.0)
    f = fc.SampledFunction.from_callable(grid, w)
    worst = 0.0
    for a in ALPHAS:
        right = fc.rl_right_derivative_w1(grid.nodes, w, 0, a)
        for h in (np.cos, lambda t: np.sin(np.pi * t), lambda t: t**2):
            base = fc.SampledFunction.from_callable(grid, h)
            g = fc.SampledFunction(grid, fc.rl_left_integral_nodes(base, a))
            worst = max(worst, fc.ibp_residual(f, g, a, right_derivative_f=right))
    return worst


def derivative_chain_error(nodes: int = 1024) -> float:
    grid = fc.TimeGrid.uniform(0.0, 1.0, nodes)
    return max(fc.check_int4_identity(fc.WeightW1(1.0, 10.0), a, grid) for a in ALPHAS)


# ---------------------------------------------------------------------------
# grushin

THETA_DIMS = ((1, 1), (2, 1), (2, 2), (3, 2))


def theta_deficit(samples: int = 100_000) -> float:
    """Largest violation ``max(0, -margin)`` over dimensions and ``A``."""
    worst = 0.0
    for N, k in THETA_DIMS:
        dims = gr.GrushinDims(N, k)
        for A in (1.0, 10.0):
            margin = gr.theta_inequality_margin(gr.ThetaParams.default(dims, A), dims, samples)
            worst = max(worst, -margin)
    return worst


def theta_errors(sizes=(32, 64, 128, 256), dims=gr.GrushinDims(1, 1), extent: float = 8.0, region: float = 4.0):
    """Max error of the discrete operator on Theta over ``r, s <= region``, per mesh size."""
    params = gr.ThetaParams.default(dims)
    errors = []
    for n in sizes:
        grid = gr.BiRadialGrid(dims, extent, extent, n, n)
        op = gr.assemble(grid)
        theta = grid.sample(lambda r, s: gr.theta_eval(params, r, s))
        R, S = grid.mesh()
        exact = gr.grushin_theta_analytic(params, dims, R, S)
        num = gr.apply(op, theta).values
        keep = (R <= region) & (S <= region)
        errors.append(np.max(np.abs(num - exact)[keep]) / np.max(np.abs(exact[keep])))
    return np.array(errors)


def theta_order() -> float:
    e = theta_errors()
    return float(np.min(np.log2(e[:-1] / e[1:])))


def polynomial_error() -> float:
    worst = 0.0
    for N, k in ((1, 1), (2, 1), (3, 2)):
        dims = gr.GrushinDims(N, k)
        grid = gr.BiRadialGrid(dims, 8.0, 8.0, 32, 32)
        op = gr.assemble(grid)
        mask = gr.interior_mask(grid)
        cases = (
            (lambda r, s: np.ones_like(r), lambda r, s: 0 * r),
            (lambda r, s: r**2, lambda r, s: 2.0 * N + 0 * r),
            (lambda r, s: s**2, lambda r, s: 2.0 * k * r**2),
            (lambda r, s: r**2 * s**2, lambda r, s: 2.0 * N * s**2 + 2.0 * k * r**4),
        )
        R, S = grid.mesh()
        for u, lu in cases:
            num = gr.apply(op, grid.sample(u)).values
            exact = lu(R, S)
            scale = max(1.0, np.max(np.abs(exact)))
            worst = max(worst, np.max(np.abs(num - exact)[mask]) / scale)
    return worst


def theta_mass_error() -> float:
    dims = gr.GrushinDims(1, 1)
    params = gr.ThetaParams.default(dims, normalize=True)
    extent = 40.0 / params.epsilon
    grid = gr.BiRadialGrid(dims, extent, extent, 1024, 1024)
    field = grid.sample(lambda r, s: gr.theta_eval(params, r, s))
    return abs(gr.biradial_integral(field) - 1.0)


# ---------------------------------------------------------------------------
# testfn

SLOPE_TIMES = 2.0 ** np.arange(4, 11)


def t1_slope_error(p: float, dims=gr.GrushinDims(1, 1)) -> float:
    totals = [tf.weak_rhs_T1(T, p, dims)[0] for T in SLOPE_TIMES]
    return abs(tf.fit_slope(SLOPE_TIMES, totals) - tf.expected_slope_T1(p, dims))


def t2_slope_error(p: float, gamma: float = 0.5, dims=gr.GrushinDims(1, 1)) -> float:
    pairs = [tf.weak_rhs_T2(T, T, p, gamma, dims) for T in SLOPE_TIMES]
    expected = tf.expected_slope_T2(p, gamma, dims)
    return max(abs(tf.fit_slope(SLOPE_TIMES, [x[i] for x in pairs]) - expected) for i in (0, 1))


# ---------------------------------------------------------------------------
# memsolver / odereduce


def kernel_sum_error() -> float:
    worst = 0.0
    for g in (0.0, 0.25, 0.5, 0.9):
        for n in (1, 7, 100, 1000):
            w = ms.kernel_weights(n, 0.01, g)
            exact = (n * 0.01) ** (1 - g) / (1 - g)
            worst = max(worst, abs(w.sum() / exact - 1))
    return worst


def cross_oracle_error() -> float:
    worst = 0.0
    for g, p1, p2, k1, k2 in ((0.5, 2.0, 2.0, 1.0, 0.0), (0.3, 3.0, 2.0, 1.0, 1.0), (0.0, 2.0, 3.0, 0.5, 1.0)):
        cfg = ms.SimConfig(
            grid=ms.GridSpec(8, 8, 8, 8), gamma=g, p1=p1, p2=p2, kappa1=k1, kappa2=k2,
            initial=ms.InitialData("constant", 0.5), dt=1e-3, horizon=1.0, diffusion=False,
        )
        pde = ms.run(cfg)
        ode = od.run_ode(od.OdeConfig(a=0, b=k1, c=k2, gamma=g, p1=p1, p2=p2, f0=0.5, dt=1e-3, horizon=1.0))
        if pde.times.shape != ode.times.shape:
            return math.inf
        worst = max(worst, float(np.max(np.abs(pde.sup_norm - ode.values) / ode.values)))
    return worst


def soe_error() -> float:
    out = {}
    for mode in ("exact", "soe"):
        cfg = ms.SimConfig(
            grid=ms.GridSpec(8, 8, 32, 32), gamma=0.5, p1=2.0, kappa1=1.0, kappa2=0.0,
            initial=ms.InitialData("gaussian-bump", 0.5, 1.0), dt=0.01, horizon=5.0, memory_mode=mode,
        )
        out[mode] = ms.run(cfg).sup_norm
    if out["exact"].shape != out["soe"].shape:
        return math.inf
    return float(np.max(np.abs(out["soe"] - out["exact"]) / out["exact"]))


def local_blowup_error() -> float:
    t_star = od.blowup_time(od.OdeConfig(a=0, b=0, c=1, p2=2, f0=1, dt=1e-4, horizon=5))
    return math.inf if t_star is None else abs(t_star - 1.0)


def linear_decay_error() -> float:
    out = od.run_ode(od.OdeConfig(a=1, b=0, c=0, f0=1, dt=1e-4, horizon=1))
    return abs(out.values[-1] / math.exp(-1) - 1)


CHECKS: tuple[Check, ...] = (
    Check("fraccalc.right_derivative_closed_vs_oracle", "fraccalc", 1e-4, right_derivative_error),
    Check("fraccalc.weighted_integral_vs_quad", "fraccalc", 1e-8, weighted_integral_error),
    Check("fraccalc.plain_integral_vs_quad", "fraccalc", 1e-8, plain_integral_error),
    Check("fraccalc.weighted_integral_T_scaling", "fraccalc", 1e-12, weighted_integral_scaling),
    Check("fraccalc.plain_integral_T_scaling", "fraccalc", 1e-12, plain_integral_scaling),
    Check("fraccalc.inversion_2048", "fraccalc", 1e-3, inversion_error),
    Check("fraccalc.ibp_2048", "fraccalc", 1e-3, ibp_error),
    Check("fraccalc.derivative_chain_1024", "fraccalc", 1e-3, derivative_chain_error),
    Check("grushin.theta_inequality_deficit", "grushin", 1e-12, theta_deficit),
    Check("grushin.theta_convergence_order", "grushin", 1.8, theta_order, sense="ge"),
    Check("grushin.polynomial_exactness", "grushin", 1e-8, polynomial_error),
    Check("grushin.theta_normalized_mass", "grushin", 1e-3, theta_mass_error),
    Check("testfn.T1_slope_p1.3", "testfn", 0.02, lambda: t1_slope_error(1.3)),
    Check("testfn.T1_slope_p5/3", "testfn", 0.02, lambda: t1_slope_error(5 / 3)),
    Check("testfn.T1_slope_p2.5", "testfn", 0.02, lambda: t1_slope_error(2.5)),
    Check("testfn.T2_slope_p2", "testfn", 0.02, lambda: t2_slope_error(2.0)),
    Check("testfn.T2_slope_p2.5", "testfn", 0.02, lambda: t2_slope_error(2.5)),
    Check("testfn.T2_slope_p3", "testfn", 0.02, lambda: t2_slope_error(3.0)),
    Check("memsolver.kernel_weight_sum", "memsolver", 1e-12, kernel_sum_error),
    Check("memsolver.cross_oracle_ode", "memsolver", 1e-6, cross_oracle_error),
    Check("memsolver.soe_vs_exact", "memsolver", 1e-3, soe_error),
    Check("odereduce.local_blowup_time", "odereduce", 0.05, local_blowup_error),
    Check("odereduce.linear_decay", "odereduce", 1e-6, linear_decay_error),
)

MODULES = tuple(sorted({c.module for c in CHECKS}))


def run_checks(only: str | None = None, tol_scale: float = 1.0) -> list[CheckResult]:
    if only is not None and only not in MODULES:
        raise ValueError(f"unknown module {only!r}; choose from {', '.join(MODULES)}")
    return [c.run(tol_scale) for c in CHECKS if only is None or c.module == only]
