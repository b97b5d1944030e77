"""Figure rendering for the report pipeline.

Uses the Agg backend and strips date metadata so repeated runs with the
same inputs produce byte-identical PNG files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 130, "metadata": {"Software": "fiflab", "Date": None}}


def _new_axes(title):
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    ax.set_title(title)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    return fig, ax


def save_graph_figure(sample, knots, knot_values, path) -> None:
    """Rendered components against t, with the interpolation knots marked."""
    fig, ax = _new_axes("rendered interpolant")
    for i in range(sample.dimension):
        ax.plot(sample.grid, sample.values[:, i], lw=0.7, label=f"h_{i + 1}")
    for i in range(knot_values.shape[1]):
        ax.plot(knots, knot_values[:, i], "k.", ms=5)
    ax.set_xlabel("t")
    if sample.dimension > 1:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_dimension_figure(mesh_report, bounds, path) -> None:
    """Log-log mesh counts with the fitted line and Moran bounds."""
    fig, ax = _new_axes("box counts")
    x = 1.0 / mesh_report.scales
    ax.loglog(x, mesh_report.counts, "o", ms=4, label=f"mesh (slope {mesh_report.slope:.3f})")
    fit_y = np.exp(mesh_report.intercept) * x**mesh_report.slope
    ax.loglog(x, fit_y, "-", lw=0.8)
    for key, style in (("moran_lower", ":"), ("moran_upper", "--")):
        val = bounds.get(key)
        if val is not None:
            ax.loglog(x, fit_y[0] * (x / x[0]) ** val, style, lw=0.8, label=f"{key} {val:.3f}")
    ax.set_xlabel("1/scale")
    ax.set_ylabel("occupied cells")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_measure_figure(measure, path, max_points: int = 40_000) -> None:
    """Chaos-game cloud in the (t, first component) plane."""
    fig, ax = _new_axes("invariant measure sample")
    stride = max(1, measure.n // max_points)
    ax.plot(measure.t[::stride], measure.z[::stride, 0], ",", alpha=0.4)
    ax.set_xlabel("t")
    ax.set_ylabel("z_1")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_fracint_figure(sample, integral, beta, path) -> None:
    """First component of the function and of its fractional integral."""
    fig, ax = _new_axes(f"fractional integral, order {beta:g}")
    ax.plot(sample.grid, sample.values[:, 0], lw=0.6, label="h_1")
    ax.plot(integral.grid, integral.values[:, 0], lw=1.0, label="integral")
    ax.set_xlabel("t")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
