"""Static SVG figures: impulse-response whiskers and binned scatters.

Output is byte-stable: the SVG id salt is fixed and no date is embedded.
"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .regress import BinscatterResult, IrfResult

__all__ = ["plot_binscatter", "plot_irf"]

_RC = {"svg.hashsalt": "shiftshare", "svg.fonttype": "path", "font.size": 9}
_META = {"Date": None, "Creator": None}


def _save(fig, path) -> Path:
    path = Path(path)
    with plt.rc_context(_RC):
        fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)
    return path


def plot_irf(results: IrfResult | Mapping[str, IrfResult], path, title: str = "", ylabel: str = "elasticity") -> Path:
    """Point estimates with 95% whiskers by horizon.

    Several labelled results are drawn side by side with a small offset.
    """
    series = {"": results} if isinstance(results, IrfResult) else dict(results)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        n = len(series)
        offsets = np.linspace(-0.15, 0.15, n) if n > 1 else [0.0]
        for off, (label, res) in zip(offsets, series.items()):
            h = res.horizons + off
            ax.errorbar(
                h,
                res.beta,
                yerr=[res.beta - res.ci_lo, res.ci_hi - res.beta],
                fmt="o",
                ms=3.5,
                capsize=2.5,
                lw=1.0,
                label=label or None,
            )
        ax.axhline(0.0, color="0.4", lw=0.8)
        ax.axvline(-0.5, color="0.6", lw=0.8, ls="--")
        ax.set_xlabel("years after shock")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if n > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
    return _save(fig, path)


def plot_binscatter(result: BinscatterResult, path, xlabel: str = "x", ylabel: str = "y", title: str = "") -> Path:
    """Bin means and the fitted line through their centroid."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.6))
        ax.scatter(result.x_mean, result.y_mean, s=14)
        xs = np.array([result.x_mean.min(), result.x_mean.max()])
        w = result.count / result.count.sum()
        xc, yc = float(w @ result.x_mean), float(w @ result.y_mean)
        ax.plot(xs, yc + result.slope * (xs - xc), lw=1.0, color="C3")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.set_title(title or f"slope {result.slope:.3f} (t = {result.tstat:.1f})")
        fig.tight_layout()
    return _save(fig, path)
