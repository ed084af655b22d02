"""Matplotlib figures written next to the CSV outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rc("figure", figsize=[6, 3.6])
plt.rc("axes", linewidth=0.6)
plt.rc("font", size=9)
plt.rc("svg", hashsalt="hwsir")  # stable element ids across runs

COLORS = {"s": "tab:blue", "i": "tab:red"}


def _save(fig, path):
    fig.savefig(path, bbox_inches="tight", metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)


def plot_sir(path, curves, ensemble=(), title=None):
    """Thick lines for model curves, faint lines for stochastic replicates.

    ``curves`` is a list of ``(label, t, s, i, linestyle)``; ``ensemble`` a
    list of ``(t, s, i)``.
    """
    fig, ax = plt.subplots()
    for t, s, i in ensemble:
        ax.plot(t, s, color=COLORS["s"], lw=0.4, alpha=0.25)
        ax.plot(t, i, color=COLORS["i"], lw=0.4, alpha=0.25)
    for label, t, s, i, ls in curves:
        if s is not None:
            ax.plot(t, s, color=COLORS["s"], lw=1.8, ls=ls, label=f"s ({label})")
        if i is not None:
            ax.plot(t, i, color=COLORS["i"], lw=1.8, ls=ls, label=f"i ({label})")
    ax.set_xlabel("time")
    ax.set_ylabel("proportion")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    if curves:
        ax.legend(frameon=False, fontsize=7)
    _save(fig, path)


def plot_bench(path, rows):
    """Runtime ratio (ODE / SSA) against the R0 label, one series per layer mix."""
    fig, ax = plt.subplots()
    groups = {}
    for r in rows:
        groups.setdefault(r["pG_pH_pW"], []).append(r)
    for mix, rs in sorted(groups.items()):
        try:
            x = [float(r["R0"]) for r in rs]
        except ValueError:  # unlabelled scenarios: plot by position
            x = list(range(len(rs)))
        ax.plot(x, [r["ratio"] for r in rs], "o-", label=mix or "unlabelled")
    ax.axhline(1.0, color="k", ls=":", lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("R0 label")
    ax.set_ylabel("ODE / SSA normalised runtime")
    ax.legend(frameon=False, title="(pG, pH, pW)")
    ax.margins(x=0.05)
    _save(fig, path)
