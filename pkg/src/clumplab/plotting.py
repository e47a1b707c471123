"""Figures written next to the CSV outputs (non-interactive backend)."""
from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

log = logging.getLogger(__name__)

STYLE = {
    "figure.figsize": (6.4, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "font.size": 10,
    "lines.linewidth": 1.4,
    "savefig.dpi": 120,
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # no timestamps in the metadata, so reruns give identical files
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    log.info("wrote %s", path)
    return path


def line_plot(path, curves, xlabel="x", ylabel="", title=None, logx=False, logy=False,
              markers=False):
    """``curves`` is a list of ``(x, y, label)`` triples."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for x, y, label in curves:
            ax.plot(x, y, "o-" if markers else "-", ms=3, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if any(c[2] for c in curves):
            ax.legend(fontsize=8)
        return _save(fig, path)


def energy_plot(path, t, E, rate, events=(), title=None):
    """Energy (dashed) with ``|dE/dt|`` on a log axis; mergers marked."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(t, E, "k--", label="E")
        ax.set_xlabel("t")
        ax.set_ylabel("E")
        ax2 = ax.twinx()
        r = np.abs(np.asarray(rate))
        ax2.semilogy(t, np.where(r > 0, r, np.nan), "C0-", lw=1.0, label="|dE/dt|")
        ax2.set_ylabel("|dE/dt|")
        for te, _ in events:
            ax.axvline(te, color="C3", lw=0.8, alpha=0.6)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def snapshot_plot(path, x, snapshots, title=None, ylabel="rho"):
    """``snapshots`` is a list of ``(t, values)``."""
    curves = [(x, v, f"t = {t:g}") for t, v in snapshots]
    return line_plot(path, curves, "x", ylabel, title)


def scan_plot(path, scans, title=None):
    """Fixed-point scans: ``scans`` maps a label to ``(Cbar, I)``; adds the diagonal."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        hi = 0.0
        for label, (c, i) in scans.items():
            ax.plot(c, i, label=label)
            hi = max(hi, float(np.max(c)))
        ax.plot([0, hi], [0, hi], "k:", lw=1.0, label="identity")
        ax.set_xlabel("Cbar")
        ax.set_ylabel("I(Cbar)")
        if title:
            ax.set_title(title)
        ax.legend(fontsize=8)
        return _save(fig, path)
