"""Static SVG figures for sweep results.

Output is byte-reproducible: the SVG hash salt is fixed and no creation date
is written, so identical tables give identical files.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import Normalize  # noqa: E402

from .experiments import ResultTable  # noqa: E402

STYLE = {
    "svg.hashsalt": "leakvqa",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
}

STAT_LABELS = {
    "expressibility": "Expr2(noiseless) - Expr2(leaky)",
    "fit": "log10(leaky loss / ideal loss)",
    "iris": "CV score(noiseless) - CV score(leaky)",
    "topology": "Expr2",
}


def _save(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def heatmap_grid(table: ResultTable, n: int, row_key: str = "d", col_key: str = "L"):
    """(row labels, column labels, values) of the ``n`` slice; missing cells are NaN."""
    rows = table.where(n=n)
    if not rows:
        raise KeyError(f"no rows with n={n} in the table")
    rlabels = sorted({r[row_key] for r in rows}, key=_order)
    clabels = sorted({r[col_key] for r in rows}, key=_order)
    vals = np.full((len(rlabels), len(clabels)), np.nan)
    for r in rows:
        vals[rlabels.index(r[row_key]), clabels.index(r[col_key])] = r["mean"]
    return rlabels, clabels, vals


def _order(v):
    return (0, v, "") if isinstance(v, (int, float)) else (1, 0, str(v))


def cell_colors(values, cmap: str = "viridis"):
    """RGBA colour of each finite value on a linear scale over the data range."""
    vals = np.asarray(values, dtype=float)
    finite = vals[np.isfinite(vals)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return plt.get_cmap(cmap)(Normalize(lo, hi)(vals)), (lo, hi)


def emit_heatmap(table: ResultTable, n: int, path, row_key: str = "d", col_key: str = "L",
                 title: str | None = None) -> None:
    """Annotated heatmap of one ``n`` slice (rows ``row_key``, columns ``col_key``)."""
    rlabels, clabels, vals = heatmap_grid(table, n, row_key, col_key)
    _, (lo, hi) = cell_colors(vals)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(1.6 + 0.75 * len(clabels), 1.2 + 0.45 * len(rlabels)))
        mesh = ax.pcolormesh(np.ma.masked_invalid(vals), cmap="viridis", vmin=lo, vmax=hi,
                             edgecolors="white", linewidth=0.5)
        for i in range(len(rlabels)):
            for j in range(len(clabels)):
                if np.isfinite(vals[i, j]):
                    shade = (vals[i, j] - lo) / (hi - lo)
                    ax.text(j + 0.5, i + 0.5, f"{vals[i, j]:.3g}", ha="center", va="center",
                            fontsize=6, color="black" if shade > 0.6 else "white")
        ax.set_xticks(np.arange(len(clabels)) + 0.5)
        ax.set_xticklabels([f"{c:.3g}" if isinstance(c, float) else str(c) for c in clabels],
                           rotation=45, ha="right")
        ax.set_yticks(np.arange(len(rlabels)) + 0.5)
        ax.set_yticklabels([str(r) for r in rlabels])
        ax.set_xlabel(col_key)
        ax.set_ylabel(row_key)
        ax.set_title(title or f"n = {n}")
        fig.colorbar(mesh, ax=ax, label=STAT_LABELS.get(table.experiment, "mean"))
        fig.tight_layout()
        _save(fig, path)


def emit_loss_curve(ideal, leaky, path, title: str = "") -> None:
    """Mean training loss per epoch for both arms on a log scale."""
    ideal = np.asarray(ideal, dtype=float)
    leaky = np.asarray(leaky, dtype=float)
    epochs = np.arange(1, len(ideal) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.semilogy(epochs, np.maximum(ideal, 1e-16), label="noiseless")
        ax.semilogy(epochs, np.maximum(leaky, 1e-16), label="leaky")
        ax.set_xlabel("epoch")
        ax.set_ylabel("fidelity loss")
        ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)
