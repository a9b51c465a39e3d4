"""Figure for the clipping study (opt-in from the CLI)."""
from __future__ import annotations

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .clipstudy import ClipCurve


def plot_clip_curve(curve: ClipCurve, path) -> None:
    """F_tau with its chord bound, and the closed-form F_tau'', side by side."""
    fig = Figure(figsize=(9.0, 3.6))
    FigureCanvasAgg(fig)
    ax1, ax2 = fig.subplots(1, 2)
    ax1.plot(curve.alphas, curve.values, label=r"$F_\tau(\alpha)$")
    pos = curve.alphas >= 0
    ax1.plot(curve.alphas[pos], curve.linear_bound[pos], "--", label=r"$\alpha F_\tau(1)$")
    ax1.set_xlabel(r"$\alpha$")
    ax1.legend(loc="upper left")
    ax1.set_title(rf"clipping correlator, $\tau={curve.tau:g}$")
    inner = np.isfinite(curve.second_derivs)
    ax2.plot(curve.alphas[inner], curve.second_derivs[inner])
    ax2.axhline(0.0, color="0.6", lw=0.8)
    ax2.set_xlabel(r"$\alpha$")
    ax2.set_title(r"$F_\tau''(\alpha)$ (corner formula)")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None} if str(path).endswith(".png") else None)
