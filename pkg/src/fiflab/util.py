"""Small shared helpers: least-squares fits in log-log space, thread caps."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float


def loglog_fit(x: np.ndarray, y: np.ndarray) -> LogLogFit:
    """Least-squares line through (log x, log y).

    Degenerate inputs (zero variance in y, e.g. a single repeated point)
    fit a flat line with r2 = 1 so that constant data reads as slope 0
    rather than as a failed fit.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two scales for a log-log fit")
    coeffs, residuals, *_ = np.polyfit(lx, ly, 1, full=True)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(residuals[0]) if residuals.size else 0.0
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-30 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return LogLogFit(slope, intercept, r2)


def thread_count(limit: int | None = None) -> int:
    """Worker cap for the parallel estimator paths.

    Honors the FIFLAB_THREADS environment variable; falls back to the CPU
    count. ``limit`` additionally caps the result (e.g. number of tasks).
    """
    env = os.environ.get("FIFLAB_THREADS")
    if env is not None:
        try:
            n = max(1, int(env))
        except ValueError:
            n = 1
    else:
        n = os.cpu_count() or 1
    if limit is not None:
        n = max(1, min(n, limit))
    return n


def decade_span(values: np.ndarray) -> float:
    """Number of decades covered by a set of positive scales."""
    v = np.asarray(values, dtype=float)
    return float(np.log10(v.max() / v.min()))
