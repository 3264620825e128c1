"""Command-line entry point: ``verify``, ``simulate``, ``sweep`` and ``decay``.

Configurations are JSON objects carrying ``"schema": 1``; unknown keys are
rejected.  Every command writes delimited text (CSV, ``%.17g`` floats) and
PNG figures into ``--out`` (default: current directory).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import memsolver as ms
from . import odereduce as od
from . import plotting
from .grushin import GrushinDims
from .testfn import critical_exponents
from .verify import MODULES, run_checks

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FMT = "%.17g"


class ConfigError(ValueError):
    """Malformed or inconsistent configuration file."""


# ---------------------------------------------------------------------------
# configuration


def load_json(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    version = data.pop("schema", None)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: expected \"schema\": {SCHEMA_VERSION}, got {version!r}")
    return data


def _check_keys(data: dict, allowed, where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _build(cls, data: dict, where: str):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(data, names, where)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def sim_config_from_dict(data: dict, where: str = "simulate") -> ms.SimConfig:
    data = dict(data)
    names = [f.name for f in dataclasses.fields(ms.SimConfig)]
    _check_keys(data, names, where)
    if "dims" in data:
        dims = data["dims"]
        if not (isinstance(dims, list) and len(dims) == 2):
            raise ConfigError(f"{where}.dims: expected [N, k]")
        data["dims"] = _build(GrushinDims, {"N": dims[0], "k": dims[1]}, f"{where}.dims")
    if "grid" in data:
        data["grid"] = _build(ms.GridSpec, data["grid"], f"{where}.grid")
    if "initial" in data:
        data["initial"] = _build(ms.InitialData, data["initial"], f"{where}.initial")
    return _build(ms.SimConfig, data, where)


def sim_config_to_dict(cfg: ms.SimConfig) -> dict:
    d = dataclasses.asdict(cfg)
    d["dims"] = [cfg.dims.N, cfg.dims.k]
    return d


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# writers


def write_series(outcome: ms.Outcome, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "sup_norm", "l1_norm", "dt"])
        for row in zip(outcome.times, outcome.sup_norm, outcome.l1_norm, outcome.dts):
            w.writerow([FMT % v for v in row])


def write_final(outcome: ms.Outcome, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "s", "u"])
        if outcome.final is None:
            return
        grid = outcome.final.grid
        for i, r in enumerate(grid.r):
            for j, s in enumerate(grid.s):
                w.writerow([FMT % r, FMT % s, FMT % outcome.final.values[i, j]])


# ---------------------------------------------------------------------------
# commands


def cmd_verify(args) -> int:
    out = Path(args.out)
    results = run_checks(args.only, args.tol_scale)
    lines = [r.line for r in results]
    (out / "verify_report.txt").write_text("\n".join(lines) + "\n")
    for r in results:
        print(r.line + (f"  # {r.note}" if r.note else ""))
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_simulate(args) -> int:
    out = Path(args.out)
    data = load_json(args.config)
    if args.ode:
        cfg = _build(od.OdeConfig, data, "ode")
        outcome = od.run_ode(cfg)
        od.write_series(outcome, out / "series.csv")
        if not args.no_plot:
            plotting.plot_ode(outcome.times, outcome.values, out / "series.png", outcome.line)
    else:
        cfg = sim_config_from_dict(data)
        outcome = ms.run(cfg)
        write_series(outcome, out / "series.csv")
        write_final(outcome, out / "final.csv")
        if not args.no_plot:
            plotting.plot_series(outcome.times, outcome.sup_norm, outcome.l1_norm, out / "series.png", outcome.line)
    print(outcome.line)
    return 0


SWEEP_KEYS = ("base", "exponent", "p", "gamma", "workers", "title")


def _expand(spec, where: str) -> list[float]:
    if isinstance(spec, list):
        values = [float(v) for v in spec]
    elif isinstance(spec, dict):
        _check_keys(spec, ("start", "stop", "count"), where)
        values = list(np.linspace(spec["start"], spec["stop"], int(spec["count"])))
    else:
        values = [float(spec)]
    if not values:
        raise ConfigError(f"{where}: empty grid")
    return values


def sweep_points(data: dict) -> tuple[list[dict], dict]:
    _check_keys(data, SWEEP_KEYS, "sweep")
    base = dict(data.get("base", {}))
    sim_config_from_dict(base, "sweep.base")
    exponent = data.get("exponent", "p2")
    if exponent not in ("p1", "p2", "both"):
        raise ConfigError("sweep.exponent: expected p1, p2 or both")
    ps = _expand(data.get("p", [2.0]), "sweep.p")
    gammas = _expand(data.get("gamma", [base.get("gamma", 0.5)]), "sweep.gamma")
    points = []
    for g in gammas:
        for p in ps:
            d = dict(base, gamma=g)
            if exponent in ("p1", "both"):
                d["p1"] = p
            if exponent in ("p2", "both"):
                d["p2"] = p
            points.append(d)
    return points, {"exponent": exponent}


def _classify(point: dict) -> tuple[str, float, str]:
    try:
        cfg = sim_config_from_dict(point, "sweep.point")
        outcome = ms.run(cfg, keep_final=False)
        t_end = outcome.t_star if outcome.kind == "BlownUp" else float(outcome.times[-1]) if outcome.times.size else math.nan
        return outcome.kind, t_end, outcome.reason
    except Exception as exc:  # noqa: BLE001 - a failed worker becomes an Undecided row
        return "Undecided", math.nan, f"{type(exc).__name__}: {exc}"


def worker_count(configured: int | None) -> int:
    env = os.environ.get("GFL_WORKERS")
    n = int(env) if env else (configured or 1)
    if n < 1:
        raise ConfigError("worker count must be >= 1")
    return n


def run_sweep(points: list[dict], workers: int) -> list[tuple[str, float, str]]:
    """Outcomes in grid order, whatever order the workers finish in."""
    if workers == 1:
        return [_classify(p) for p in points]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_classify, points))


def cmd_sweep(args) -> int:
    out = Path(args.out)
    data = load_json(args.config)
    points, meta = sweep_points(data)
    workers = worker_count(data.get("workers"))
    results = run_sweep(points, workers)
    rows = []
    for point, (kind, t_end, reason) in zip(points, results):
        cfg = sim_config_from_dict(point, "sweep.point")
        p = cfg.p1 if meta["exponent"] == "p1" else cfg.p2
        p_c1, p_0, _ = critical_exponents(cfg.dims, cfg.gamma)
        inv = math.inf if cfg.gamma == 0 else 1.0 / cfg.gamma
        rows.append(dict(gamma=cfg.gamma, p=p, outcome=kind, t_end=t_end, p_c1=p_c1, p_0=p_0, inv_gamma=inv,
                         config_hash=config_hash(sim_config_to_dict(cfg)), reason=reason))
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write("# one fixed datum per grid point: BlownUp rows are evidence of blow-up,\n")
        fh.write("# GlobalToHorizon rows only mean no blow-up was seen before the horizon\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gamma", "p", "outcome", "t_end", "config_hash", "p_c1", "p_0", "inv_gamma"])
        for r in rows:
            w.writerow([FMT % r["gamma"], FMT % r["p"], r["outcome"], FMT % r["t_end"], r["config_hash"],
                        FMT % r["p_c1"], FMT % r["p_0"], FMT % r["inv_gamma"]])
    if not args.no_plot:
        plotting.plot_sweep(rows, out / "sweep.png", data.get("title", f"sweep over {meta['exponent']}"))
    for r in rows:
        print(f"gamma={r['gamma']:.4g} p={r['p']:.4g} {r['outcome']} {r['t_end']:.6g}")
    return 0


DECAY_GRID = ms.GridSpec(r_max=40.0, s_max=200.0, n_r=64, n_s=128)
DECAY_WINDOW = (1.0, 50.0)


def decay_config(dims: GrushinDims, refine: int = 1) -> ms.SimConfig:
    g = DECAY_GRID
    return ms.SimConfig(
        dims=dims,
        grid=ms.GridSpec(g.r_max, g.s_max, g.n_r * refine, g.n_s * refine),
        kappa1=0.0,
        kappa2=0.0,
        initial=ms.InitialData("gaussian-bump", 1.0, 1.0),
        dt=0.05,
        horizon=DECAY_WINDOW[1],
    )


def decay_slope(dims: GrushinDims, refine: int = 1):
    """``(slope, intercept, outcome)`` of the log-log sup-norm fit over the decay window."""
    outcome = ms.run(decay_config(dims, refine))
    t = outcome.times
    keep = (t >= DECAY_WINDOW[0]) & (t <= DECAY_WINDOW[1])
    slope, intercept = np.polyfit(np.log(t[keep]), np.log(outcome.sup_norm[keep]), 1)
    return float(slope), float(intercept), outcome


def cmd_decay(args) -> int:
    out = Path(args.out)
    try:
        N, k = (int(v) for v in args.dims.split(","))
    except ValueError:
        raise ConfigError(f"--dims expects N,k, got {args.dims!r}") from None
    dims = GrushinDims(N, k)
    slope, intercept, outcome = decay_slope(dims, args.refine)
    expected = -dims.Q / 2
    write_series(outcome, out / "decay.csv")
    if not args.no_plot:
        plotting.plot_decay(outcome.times, outcome.sup_norm, DECAY_WINDOW, slope, intercept, out / "decay.png",
                            f"N={N}, k={k}: expected slope {expected:g}")
    print(f"SLOPE N={N} k={k} fitted={slope:.6f} expected={expected:g} rel_dev={abs(slope / expected - 1):.4f}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="grushinlab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        p.add_argument("--no-plot", action="store_true", help="skip PNG figures")

    p = sub.add_parser("verify", help="run the numerical self-checks")
    p.add_argument("--only", choices=MODULES)
    p.add_argument("--tol-scale", type=float, default=1.0, help="multiply error tolerances")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run one configuration")
    p.add_argument("config")
    p.add_argument("--ode", action="store_true", help="config describes the scalar reduction")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="classify a (gamma, p) grid")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("decay", help="pure-diffusion decay slope")
    p.add_argument("--dims", default="1,1")
    p.add_argument("--refine", type=int, default=1, help="multiply cell counts")
    common(p)
    p.set_defaults(func=cmd_decay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
