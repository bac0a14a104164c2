"""SVG figures for experiment output.

Figures are written with a fixed hash salt and no date stamp so repeated
runs produce identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

SVG_META = {"Date": None}


def _save(fig, path):
    with matplotlib.rc_context({"svg.hashsalt": "prescript-opt"}):
        fig.savefig(path, format="svg", metadata=SVG_META)
    plt.close(fig)


def summary_plot(summary, path) -> None:
    """Mean out-of-sample PCR against perturbation level, one line per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = list(dict.fromkeys(s[0] for s in summary))
    for method in methods:
        pts = [(s[1], s[2]) for s in summary if s[0] == method and math.isfinite(s[2])]
        if pts:
            xs, ys = zip(*pts)
            ax.plot(xs, ys, marker="o", label=method.upper())
    ax.axhline(0.0, color="grey", lw=0.8, ls=":")
    ax.set_xlabel("maximum mean perturbation")
    ax.set_ylabel("mean out-of-sample PCR")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def box_plots(rows, path) -> None:
    """Distribution of out-of-sample PCR per method, one panel per level."""
    levels = list(dict.fromkeys(r.perturbation for r in rows))
    methods = list(dict.fromkeys(r.method for r in rows))
    fig, axes = plt.subplots(1, len(levels), figsize=(3.2 * len(levels), 3.6), squeeze=False,
                             sharey=True)
    for ax, level in zip(axes[0], levels):
        data = []
        for method in methods:
            vals = [r.oos_pcr for r in rows
                    if r.method == method and r.perturbation == level and math.isfinite(r.oos_pcr)]
            data.append(vals or [math.nan])
        ax.boxplot(data)
        ax.set_xticks(range(1, len(methods) + 1), [m.upper() for m in methods], rotation=45)
        ax.set_title(f"m = {level:g}")
        ax.axhline(0.0, color="grey", lw=0.8, ls=":")
    axes[0][0].set_ylabel("out-of-sample PCR")
    fig.tight_layout()
    _save(fig, path)
