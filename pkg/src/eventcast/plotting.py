"""Figure rendering for the experiment commands.

Every figure goes to a PNG next to the delimited output it visualizes,
with the run fingerprint hash printed in the footer so a stray image can
be traced back to its configuration.  Rendering is pure: same series,
same bytes.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_RC = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def fingerprint_hash(fingerprint: dict) -> str:
    blob = json.dumps(fingerprint, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _finish(fig, path: Path, fingerprint: dict | None) -> Path:
    if fingerprint is not None:
        fig.text(0.99, 0.01, f"run {fingerprint_hash(fingerprint)}",
                 ha="right", va="bottom", fontsize=6, color="0.45")
    fig.savefig(path, metadata={"Software": "eventcast"},
                bbox_inches="tight")
    plt.close(fig)
    return path


def line_series(path, series: dict, xlabel: str, ylabel: str, title: str,
                fingerprint: dict | None = None, yerr: dict | None = None,
                hline: float | None = None) -> Path:
    """One line per named series; optional error band and reference line."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for name in sorted(series):
            xs, ys = series[name]
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2,
                    label=name)
            if yerr and name in yerr:
                err = yerr[name]
                lo = [y - e for y, e in zip(ys, err)]
                hi = [y + e for y, e in zip(ys, err)]
                ax.fill_between(xs, lo, hi, alpha=0.15)
        if hline is not None:
            ax.axhline(hline, color="0.4", linewidth=0.8, linestyle="--")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(series) > 1:
            ax.legend(fontsize=7)
        return _finish(fig, Path(path), fingerprint)


def grouped_bars(path, categories, groups: dict, ylabel: str, title: str,
                 fingerprint: dict | None = None, yerr: dict | None = None,
                 hline: float | None = None) -> Path:
    """groups: name -> list of values aligned with categories."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(categories)), 3.6))
        names = sorted(groups)
        width = 0.8 / max(len(names), 1)
        for gi, name in enumerate(names):
            xs = [i + gi * width for i in range(len(categories))]
            err = yerr.get(name) if yerr else None
            ax.bar(xs, groups[name], width=width, label=name, yerr=err,
                   capsize=2 if err is not None else 0)
        if hline is not None:
            ax.axhline(hline, color="0.4", linewidth=0.8, linestyle="--")
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(categories))])
        ax.set_xticklabels(categories, rotation=30, ha="right", fontsize=7)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        if len(names) > 1:
            ax.legend(fontsize=7)
        return _finish(fig, Path(path), fingerprint)


def scatter(path, xs, ys, xlabel, ylabel, title,
            fingerprint: dict | None = None, labels=None) -> Path:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        if labels is None:
            ax.scatter(xs, ys, s=12, alpha=0.7)
        else:
            seen = []
            for lab in labels:
                if lab not in seen:
                    seen.append(lab)
            for lab in seen:
                sel = [i for i, l2 in enumerate(labels) if l2 == lab]
                ax.scatter([xs[i] for i in sel], [ys[i] for i in sel],
                           s=12, alpha=0.7, label=lab)
            ax.legend(fontsize=6)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        return _finish(fig, Path(path), fingerprint)


def heatmap(path, matrix, row_labels, col_labels, title,
            fingerprint: dict | None = None, value_fmt="{:+.3f}") -> Path:
    """Annotated matrix; NaN cells are hatched out."""
    import numpy as np
    mat = np.asarray(matrix, dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(
            figsize=(1.0 + 0.55 * len(col_labels),
                     1.0 + 0.45 * len(row_labels)))
        masked = np.ma.masked_invalid(mat)
        vmax = float(np.nanmax(np.abs(mat))) if np.isfinite(mat).any() else 1.0
        vmax = vmax if vmax > 0 else 1.0
        im = ax.imshow(masked, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        ax.set_xticks(range(len(col_labels)))
        ax.set_xticklabels(col_labels, rotation=45, ha="right", fontsize=7)
        ax.set_yticks(range(len(row_labels)))
        ax.set_yticklabels(row_labels, fontsize=7)
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                if np.isfinite(mat[i, j]):
                    ax.text(j, i, value_fmt.format(mat[i, j]),
                            ha="center", va="center", fontsize=6)
        fig.colorbar(im, ax=ax, shrink=0.8)
        ax.set_title(title)
        ax.grid(False)
        return _finish(fig, Path(path), fingerprint)


def category_spreads(path, panels: dict, ylabel: str, title: str,
                     fingerprint: dict | None = None) -> Path:
    """Per-panel category mean with +-1 sigma boxes and +-3 sigma whiskers.

    panels: dimension -> list of (category, mean, std, count).
    """
    with plt.rc_context(_RC):
        n = len(panels)
        fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.4), squeeze=False)
        for ax, (dim, rows) in zip(axes[0], sorted(panels.items())):
            for i, (cat, mean, std, count) in enumerate(rows):
                ax.vlines(i, mean - 3 * std, mean + 3 * std,
                          color="0.6", linewidth=1)
                ax.bar([i], [2 * std], bottom=mean - std, width=0.5,
                       color="C0", alpha=0.6)
                ax.plot([i - 0.25, i + 0.25], [mean, mean], color="k",
                        linewidth=1.2)
            ax.set_xticks(range(len(rows)))
            ax.set_xticklabels([f"{cat} ({count})"
                               for cat, _m, _s, count in rows],
                               rotation=60, ha="right", fontsize=6)
            ax.set_title(dim, fontsize=8)
        axes[0][0].set_ylabel(ylabel)
        fig.suptitle(title, fontsize=10)
        return _finish(fig, Path(path), fingerprint)
