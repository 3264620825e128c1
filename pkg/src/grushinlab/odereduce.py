"""Scalar reduction ``f' + a f = b int_0^t (t-s)**(-gamma) f**p1(s) ds + c f**p2``.

Spatially averaging the PDE against a normalized comparison function leads
to this inequality; here it is integrated as an equality, which is the
extremal driving.  The linear decay is integrated exactly (exponential
Euler), the memory and power terms are explicit, and the memory integral
uses the same product-integration weights as :mod:`grushinlab.memsolver`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .memsolver import ExactLedger, power

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OdeConfig:
    """Coefficients, exponents, data and stepping policy.

    ``growth`` switches on a relative-change controller: steps whose
    relative change in ``f`` exceeds ``2 * growth`` are rejected and halved,
    accepted steps rescale the next one by ``growth / change`` (at most
    1.5x).  ``dt`` is then only the first step.  This lets slowly evolving
    solutions reach large times in few steps.  ``None`` keeps ``dt`` fixed
    apart from the halving on more-than-doubling steps.
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 0.0
    gamma: float = 0.5
    p1: float = 2.0
    p2: float = 2.0
    f0: float = 1.0
    dt: float = 1e-3
    horizon: float = 10.0
    blowup_threshold: float = 1e12
    dt_min: float = 1e-12
    growth: float | None = None
    max_steps: int = 2_000_000

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0:
            raise ValueError("a, b, c must be nonnegative")
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError("gamma must lie in [0, 1)")
        if self.p1 <= 1 or self.p2 <= 1:
            raise ValueError("p1 and p2 must exceed 1")
        if self.f0 <= 0:
            raise ValueError("f0 must be positive")
        if not (0 < self.dt <= self.horizon):
            raise ValueError("need 0 < dt <= horizon")
        if self.blowup_threshold <= self.f0:
            raise ValueError("blow-up threshold must exceed f0")
        if self.growth is not None and self.growth <= 0:
            raise ValueError("growth must be positive")

    def refined(self) -> "OdeConfig":
        """Same problem with ``dt`` (and ``growth``) halved."""
        growth = None if self.growth is None else self.growth / 2
        return replace(self, dt=self.dt / 2, growth=growth)


@dataclass
class OdeOutcome:
    kind: Literal["BlownUp", "GlobalToHorizon", "Undecided"]
    t_star: float | None
    reason: str
    times: np.ndarray
    values: np.ndarray
    dts: np.ndarray

    @property
    def line(self) -> str:
        t = "nan" if self.t_star is None else repr(self.t_star)
        return f"OUTCOME {self.kind} {t}"

    def value_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.values))


def _phi1(z: float) -> float:
    """``(exp(z) - 1) / z`` with the removable singularity filled."""
    return 1.0 if z == 0.0 else math.expm1(z) / z


def run_ode(config: OdeConfig) -> OdeOutcome:
    """Integrate the equality system until the horizon or blow-up."""
    cfg = config
    ledger = ExactLedger(cfg.gamma, (1,), capacity=1024) if cfg.b != 0.0 else None
    f = cfg.f0
    t = 0.0
    if ledger is not None:
        ledger.record(0.0, power(np.array([f]), cfg.p1))
    times, values, dts = [0.0], [f], [0.0]
    dt = cfg.dt

    def finish(kind, t_star, reason):
        return OdeOutcome(kind, t_star, reason, np.asarray(times), np.asarray(values), np.asarray(dts))

    def underflow():
        growing = len(values) > 10 and bool(np.all(np.diff(values[-11:]) > 0))
        if growing:
            return finish("BlownUp", t, "step size underflow with monotone growth")
        return finish("Undecided", None, "step size underflow without monotone growth")

    while t < cfg.horizon * (1 - 1e-12):
        if len(times) > cfg.max_steps:
            return finish("Undecided", None, f"step budget of {cfg.max_steps} exhausted at t={t:.6g}")
        mem = float(ledger.memory()[0]) if ledger is not None else 0.0
        forcing = cfg.b * mem + cfg.c * abs(f) ** cfg.p2
        h = min(dt, cfg.horizon - t)
        f_new = math.exp(-cfg.a * h) * f + h * _phi1(-cfg.a * h) * forcing
        if not math.isfinite(f_new):
            change = math.inf
        elif f == 0.0:
            # decayed below the smallest double
            change = 0.0 if f_new == 0.0 else math.inf
        else:
            change = abs(f_new - f) / f
        too_big = not math.isfinite(f_new) or f_new > 2.0 * f
        if cfg.growth is not None:
            too_big = too_big or change > 2.0 * cfg.growth
        if too_big:
            dt = h * 0.5
            if dt < cfg.dt_min:
                return underflow()
            continue
        t += h
        f = f_new
        if ledger is not None:
            ledger.record(t, power(np.array([f]), cfg.p1), step=h)
        times.append(t)
        values.append(f)
        dts.append(h)
        if f > cfg.blowup_threshold:
            return finish("BlownUp", t, "value exceeded threshold")
        if cfg.growth is not None:
            dt = h * (1.5 if change == 0 else min(1.5, cfg.growth / change))
    return finish("GlobalToHorizon", None, "reached horizon")


def blowup_time(config: OdeConfig, rel_tol: float = 0.10) -> float | None:
    """Blow-up time from the refined run, if it agrees with the base run within ``rel_tol``."""
    coarse = run_ode(config)
    if coarse.kind != "BlownUp":
        return None
    fine = run_ode(config.refined())
    if fine.kind != "BlownUp":
        return None
    if abs(fine.t_star - coarse.t_star) > rel_tol * fine.t_star:
        logger.info("blow-up times disagree: %g vs %g", coarse.t_star, fine.t_star)
        return None
    return fine.t_star


def lemma3_threshold(
    a: float,
    b: float,
    gamma: float,
    p: float,
    dt: float = 1e-3,
    cutoff: float = 1.0,
    f0_max: float = 1e6,
    rel_tol: float = 1e-3,
) -> float:
    """Least ``f0`` (to ``rel_tol``) whose equality solution blows up before ``cutoff``.

    Bisection in ``log f0`` on the memory-only system (``c = 0``).  This is an
    empirical lower bracket for the data-size constant; returns ``inf`` when
    even ``f0_max`` does not blow up in time.
    """
    if a <= 0 or b <= 0 or p <= 1:
        raise ValueError("need a, b > 0 and p > 1")
    base = OdeConfig(a=a, b=b, c=0.0, gamma=gamma, p1=p, f0=1.0, dt=dt, horizon=cutoff)

    def blows(f0: float) -> bool:
        return run_ode(replace(base, f0=f0)).kind == "BlownUp"

    hi = f0_max
    if not blows(hi):
        logger.warning("no blow-up before t=%g for f0 up to %g", cutoff, f0_max)
        return math.inf
    lo = hi
    while blows(lo):
        lo /= 10.0
        if lo < 1e-12:
            return lo
    lo_log, hi_log = math.log(lo), math.log(hi)
    while hi_log - lo_log > rel_tol:
        mid = 0.5 * (lo_log + hi_log)
        if blows(math.exp(mid)):
            hi_log = mid
        else:
            lo_log = mid
    return math.exp(hi_log)


def write_series(outcome: OdeOutcome, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "f", "dt"])
        for t, f, h in zip(outcome.times, outcome.values, outcome.dts):
            w.writerow(["%.17g" % t, "%.17g" % f, "%.17g" % h])
