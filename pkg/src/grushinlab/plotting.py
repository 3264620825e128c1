"""Matplotlib figures written next to the CSV reports (Agg backend, no display)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

params = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": [5.0, 3.4],
    "figure.dpi": 120,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "savefig.bbox": "tight",
}

OUTCOME_STYLE = {
    "BlownUp": dict(marker="x", color="#b2182b"),
    "GlobalToHorizon": dict(marker="o", color="#2166ac", mfc="none"),
    "Undecided": dict(marker="s", color="#777777", mfc="none"),
}


def _save(fig, path) -> None:
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def plot_series(times, sup_norm, l1_norm, path, title: str = "") -> None:
    """Sup and L1 norms against time on a log scale."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.semilogy(times, np.maximum(sup_norm, 1e-300), label="sup |u|")
        ax.semilogy(times, np.maximum(l1_norm, 1e-300), "--", label="int |u|")
        ax.set_xlabel("t")
        ax.set_ylabel("norm")
        ax.set_title(title)
        ax.legend()
        _save(fig, path)


def plot_ode(times, values, path, title: str = "") -> None:
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        t = np.asarray(times)
        if t.size > 1 and t[-1] > 100 * max(t[1], 1e-300):
            ax.loglog(t[1:], values[1:])
        else:
            ax.semilogy(t, values)
        ax.set_xlabel("t")
        ax.set_ylabel("f")
        ax.set_title(title)
        _save(fig, path)


def plot_decay(times, sup_norm, window, slope, intercept, path, title: str = "") -> None:
    """Log-log decay with the fitted line over ``window``."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        t = np.asarray(times)
        keep = t > 0
        ax.loglog(t[keep], np.asarray(sup_norm)[keep], label="sup |u|")
        tw = np.geomspace(window[0], window[1], 32)
        ax.loglog(tw, np.exp(intercept) * tw**slope, "k--", label=f"fit slope {slope:.3f}")
        ax.axvspan(window[0], window[1], color="0.9", zorder=0)
        ax.set_xlabel("t")
        ax.set_ylabel("sup |u|")
        ax.set_title(title)
        ax.legend()
        _save(fig, path)


def plot_sweep(rows, path, title: str = "") -> None:
    """Outcomes in the ``(gamma, p)`` plane with the critical-exponent curves.

    ``rows`` are mappings with keys ``gamma``, ``p``, ``outcome``, ``p_c1``,
    ``p_0`` and ``inv_gamma``.
    """
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for kind, style in OUTCOME_STYLE.items():
            pts = [(r["gamma"], r["p"]) for r in rows if r["outcome"] == kind]
            if pts:
                g, p = zip(*pts)
                ax.plot(g, p, linestyle="none", label=kind, **style)
        curve = sorted({(r["gamma"], r["p_c1"], r["p_0"], r["inv_gamma"]) for r in rows})
        if curve:
            g = np.array([c[0] for c in curve])
            p_top = max(r["p"] for r in rows)
            ax.plot(g, [c[1] for c in curve], "k-", label="p_c1")
            if len(g) > 1:
                ax.plot(g, [c[2] for c in curve], "k--", label="p_0")
                inv = np.array([c[3] for c in curve])
                finite = np.isfinite(inv) & (inv <= 2 * p_top)
                if finite.any():
                    ax.plot(g[finite], inv[finite], "k:", label="1/gamma")
            else:
                ax.axhline(curve[0][2], color="k", ls="--", label="p_0")
                if math.isfinite(curve[0][3]):
                    ax.axhline(curve[0][3], color="k", ls=":", label="1/gamma")
            ax.set_ylim(min(r["p"] for r in rows) - 0.1, p_top + 0.1)
        ax.set_xlabel("gamma")
        ax.set_ylabel("p")
        ax.set_title(title)
        ax.legend(loc="best")
        _save(fig, path)
