"""Optional PNG previews written next to the CSV outputs."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _columns(path: Path) -> dict:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for key in rows[0] if rows else []:
        try:
            out[key] = np.array([float(r[key]) if r[key] != "" else np.nan for r in rows])
        except ValueError:
            continue
    return out


def sweep_png(path: Path, columns, ylabel: str, x: str = "energy_pJ", logy: bool = False) -> Path:
    """Line plot of selected CSV columns against ``x``."""
    data = _columns(Path(path))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for col in columns:
        y = np.abs(data[col]) if logy else data[col]
        ax.plot(data[x], y, marker="o", ms=3, label=col)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(ylabel)
    ax.legend(frameon=False)
    fig.tight_layout()
    out = Path(path).with_suffix(".png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def wigner_png(grid, out: Path) -> Path:
    """Filled contour of a Wigner grid with a symmetric color scale."""
    lim = float(np.abs(grid.w).max())
    fig, ax = plt.subplots(figsize=(4, 3.5))
    cs = ax.contourf(grid.p, grid.q, grid.w, levels=41, cmap="RdBu_r", vmin=-lim, vmax=lim)
    fig.colorbar(cs, ax=ax)
    ax.set_xlabel("p")
    ax.set_ylabel("q")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return Path(out)
