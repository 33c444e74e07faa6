"""Static figures rendered next to the CSV outputs.

Uses the non-interactive Agg backend; every function writes one file and
returns its path.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_WINNER_STYLE = {"DF": ("tab:blue", "o"), "CF": ("tab:red", "s"), "tie": ("0.6", "x")}


def figure_path(csv_path: str | Path, suffix: str = ".png") -> Path:
    return Path(csv_path).with_suffix(suffix)


def plot_sweep(rows, path: str | Path, xlabel: str = "axis", logx: bool = False,
               ylabel: str = "outage probability") -> Path:
    """One line per ``kind``; simulation rows get 95% error bars."""
    series = defaultdict(list)
    for r in rows:
        if r.ok:
            series[r.kind].append((r.axis, r.value, r.error))
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for kind in sorted(series):
        pts = np.array(sorted(series[kind]))
        x, y, e = pts[:, 0], pts[:, 1], pts[:, 2]
        if kind.endswith("montecarlo"):
            ax.errorbar(x, y, yerr=e, fmt="o", ms=3, capsize=2, label=kind)
        else:
            ax.plot(x, y, marker=".", label=kind)
    positive = [v for pts in series.values() for _, v, _ in pts if v > 0]
    if positive and max(positive) / min(positive) > 100:
        ax.set_yscale("log")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_preference_map(cells, path: str | Path, D: float | None = None) -> Path:
    """Relay positions coloured by the preferred scheme."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (color, marker) in _WINNER_STYLE.items():
        pts = [(c.rx, c.ry) for c in cells if c.winner == label]
        if pts:
            xy = np.array(pts)
            ax.scatter(xy[:, 0], xy[:, 1], c=color, marker=marker, label=label, s=30)
    if D is not None:
        ax.plot([0, D], [0, 0], "k^", ms=8)
    ax.set_xlabel("relay x")
    ax.set_ylabel("relay y")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_validation(report, path: str | Path, z_max: float = 3.0) -> Path:
    """Z-scores of the statistical checks with the acceptance band."""
    checks = [c for c in report.checks if np.isfinite(c.z)]
    fig, ax = plt.subplots(figsize=(7, 4))
    z = np.clip([c.z for c in checks], -10, 10)
    colors = ["tab:green" if c.passed else "tab:red" for c in checks]
    ax.bar(np.arange(len(checks)), z, color=colors)
    ax.axhline(z_max, color="k", lw=0.8, ls="--")
    ax.axhline(-z_max, color="k", lw=0.8, ls="--")
    ax.set_xlabel("check index")
    ax.set_ylabel("z-score (clipped to +-10)")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
