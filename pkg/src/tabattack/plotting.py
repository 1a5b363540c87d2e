"""Figures for sweep curves and power spectra.

Rendering uses the non-interactive Agg backend. SVG output is made
reproducible by fixing the hash salt and dropping the date stamp.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "tabattack",
    "svg.fonttype": "none",
}
METHOD_STYLE = {"main": ("tab:red", "o"), "brute": ("tab:blue", "s")}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    meta = {".svg": {"Date": None}, ".png": {"Software": None}}.get(path.suffix, {})
    fig.savefig(path, metadata=meta)
    plt.close(fig)
    return path


def plot_sweep(points: list[dict], path: str | Path, title: str | None = None) -> Path:
    """Accuracy (left) and FP/FN counts (right) against the number of
    modified features, one line per attack method."""
    with plt.rc_context(STYLE):
        fig, (ax_acc, ax_err) = plt.subplots(1, 2, figsize=(7.0, 2.8), constrained_layout=True)
        methods = sorted({p["method"] for p in points}, key=lambda m: (m != "main", m))
        for method in methods:
            rows = sorted((p for p in points if p["method"] == method), key=lambda p: p["k"])
            k = [p["k"] for p in rows]
            color, marker = METHOD_STYLE.get(method, ("black", "^"))
            ax_acc.plot(k, [p["accuracy"] for p in rows], color=color, marker=marker, label=method)
            ax_err.plot(k, [p["fp"] for p in rows], color=color, marker=marker, label=f"{method} FP")
            ax_err.plot(k, [p["fn"] for p in rows], color=color, marker=marker, linestyle="--",
                        label=f"{method} FN")
        ax_acc.set_xlabel("features modified (k)")
        ax_acc.set_ylabel("accuracy")
        ax_acc.set_ylim(-0.02, 1.02)
        ax_err.set_xlabel("features modified (k)")
        ax_err.set_ylabel("count")
        ax_acc.legend(loc="best")
        ax_err.legend(loc="best")
        if title:
            fig.suptitle(title)
        return _save(fig, path)


def plot_spectra(original: np.ndarray, attacked: np.ndarray, path: str | Path,
                 labels=("original", "attacked")) -> Path:
    """Side-by-side log power spectra on a shared color scale."""
    lo = min(original.min(), attacked.min())
    hi = max(original.max(), attacked.max())
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.0), constrained_layout=True)
        for ax, img, lab in zip(axes, (original, attacked), labels):
            im = ax.imshow(img, aspect="auto", cmap="magma", vmin=lo, vmax=hi, interpolation="nearest")
            ax.set_title(lab)
            ax.grid(False)
            ax.set_xlabel("feature frequency")
            ax.set_ylabel("sample frequency")
        fig.colorbar(im, ax=axes, shrink=0.9, label="log(1 + power)")
        return _save(fig, path)
