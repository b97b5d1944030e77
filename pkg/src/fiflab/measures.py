"""Invariant measures on the graph of a fractal interpolation function.

The branch maps together with a probability vector determine a unique
invariant Borel probability measure supported on the graph.  This module
samples it by random iteration (chaos game), computes cylinder masses on the
symbol space, estimates local dimensions from ball masses, and evaluates the
theoretical dimension bounds for the measure.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import (
    AffineForcing,
    FifSystem,
    PolynomialForcing,
    SampledForcing,
    contraction_ratios,
)
from .dimension import moran_solve
from .errors import DataValidationError
from .util import loglog_fit, thread_count

_EUCLIDEAN_NOTE = (
    "ball metric is Euclidean; the graph metric used by the bounds is "
    "equivalent but with unquantified constants"
)


@dataclass(frozen=True)
class ProbabilityVector:
    """Strictly positive branch probabilities summing to 1 (within 1e-12)."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if p.ndim != 1 or p.size < 1:
            raise DataValidationError("probability vector must be 1-D and nonempty")
        if np.any(p <= 0.0):
            raise DataValidationError("probabilities must be strictly positive")
        if abs(float(p.sum()) - 1.0) > 1e-12:
            raise DataValidationError("probabilities must sum to 1 within 1e-12")

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityVector":
        return cls(np.full(n, 1.0 / n))

    @property
    def size(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Chaos-game point cloud with the metadata needed to reproduce it.

    ``indices`` keeps the drawn branch symbols (after burn-in), which is the
    sampled symbol sequence the cylinder masses refer to.  Weights are
    uniform 1/n.
    """

    t: np.ndarray
    z: np.ndarray
    seed: int
    burn_in: int
    indices: np.ndarray

    @property
    def n(self) -> int:
        return self.t.size

    @property
    def weights(self) -> float:
        return 1.0 / self.n

    def points(self) -> np.ndarray:
        return np.column_stack([self.t, self.z])


# --------------------------------------------------------------------------
# chaos game
# --------------------------------------------------------------------------


@njit(cache=True)
def _orbit_kernel(
    symbols, slopes, offsets, scalings, kinds,
    poly, poly_deg, nodes, node_len, samples,
    t_start, z_start, out_t, out_z,
):  # pragma: no cover - compiled
    t = t_start
    M = z_start.size
    z = z_start.copy()
    for i in range(symbols.size):
        k = symbols[i]
        if kinds[k] == 0:
            for m in range(M):
                acc = 0.0
                for j in range(poly_deg[k], -1, -1):
                    acc = acc * t + poly[k, j, m]
                z[m] = scalings[k] * z[m] + acc
        else:
            length = node_len[k]
            lo = 0
            hi = length - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if nodes[k, mid] <= t:
                    lo = mid
                else:
                    hi = mid
            w = (t - nodes[k, lo]) / (nodes[k, lo + 1] - nodes[k, lo])
            if w < 0.0:
                w = 0.0
            elif w > 1.0:
                w = 1.0
            for m in range(M):
                qv = samples[k, lo, m] * (1.0 - w) + samples[k, lo + 1, m] * w
                z[m] = scalings[k] * z[m] + qv
        t = slopes[k] * t + offsets[k]
        out_t[i] = t
        for m in range(M):
            out_z[i, m] = z[m]


def _forcing_tables(system: FifSystem):
    """Pack branch forcings into arrays the orbit kernel can evaluate exactly.

    Affine and polynomial forcings go through Horner coefficients; sampled
    forcings keep their node grids (linear interpolation between samples is
    their definition, so the kernel is exact for every variant).
    """
    n_b = len(system.branches)
    M = system.data.dimension
    kinds = np.zeros(n_b, dtype=np.int64)
    coeff_list = []
    node_list = []
    for br in system.branches:
        f = br.forcing
        if isinstance(f, PolynomialForcing):
            coeff_list.append(np.asarray(f.coefficients, dtype=float))
            node_list.append(None)
        elif isinstance(f, AffineForcing):
            coeff_list.append(np.stack([f.intercept, f.slope]))
            node_list.append(None)
        elif isinstance(f, SampledForcing):
            coeff_list.append(None)
            node_list.append((f.nodes, f.samples))
        else:
            raise DataValidationError(f"forcing {type(f).__name__} not supported")
    max_deg = max((c.shape[0] for c in coeff_list if c is not None), default=1)
    max_len = max((n[0].size for n in node_list if n is not None), default=2)
    poly = np.zeros((n_b, max_deg, M))
    poly_deg = np.zeros(n_b, dtype=np.int64)
    nodes = np.zeros((n_b, max_len))
    nodes[:, 1] = 1.0
    node_len = np.full(n_b, 2, dtype=np.int64)
    samples = np.zeros((n_b, max_len, M))
    for k in range(n_b):
        if coeff_list[k] is not None:
            c = coeff_list[k]
            poly[k, : c.shape[0], :] = c
            poly_deg[k] = c.shape[0] - 1
        else:
            nk, sk = node_list[k]
            kinds[k] = 1
            nodes[k, : nk.size] = nk
            nodes[k, nk.size :] = nk[-1] + np.arange(1, max_len - nk.size + 1)
            node_len[k] = nk.size
            samples[k, : nk.size, :] = sk
    return kinds, poly, poly_deg, nodes, node_len, samples


def draw_symbols(p: ProbabilityVector, count: int, seed: int) -> np.ndarray:
    """Branch symbols by inverse-CDF over a counter-based generator.

    Philox with an explicit 64-bit seed keeps runs reproducible and
    splittable across platforms.
    """
    rng = np.random.Generator(np.random.Philox(np.uint64(seed)))
    u = rng.random(count)
    cdf = np.cumsum(p.p)
    return np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1).astype(np.int64)


def chaos_game(
    system: FifSystem,
    p: ProbabilityVector,
    n: int,
    burn_in: int = 64,
    seed: int = 0,
) -> EmpiricalMeasure:
    """Random iteration of the branch maps driven by ``p``.

    Starts from the first data point (which already lies on the graph),
    repeatedly draws a branch and applies its map, and discards the first
    ``burn_in`` points; the remaining empirical distribution approximates
    the invariant measure.  Deterministic given ``seed``.
    """
    if n < 1 or burn_in < 0:
        raise ValueError("need n >= 1 and burn_in >= 0")
    if p.size != len(system.branches):
        raise DataValidationError("probability vector length must match branch count")
    symbols = draw_symbols(p, burn_in + n, seed)
    kinds, poly, poly_deg, nodes, node_len, samples = _forcing_tables(system)
    out_t = np.empty(burn_in + n)
    out_z = np.empty((burn_in + n, system.data.dimension))
    _orbit_kernel(
        symbols, system.slopes, system.offsets, system.scalings, kinds,
        poly, poly_deg, nodes, node_len, samples,
        float(system.data.knots[0]), system.data.values[0].astype(float),
        out_t, out_z,
    )
    return EmpiricalMeasure(
        out_t[burn_in:], out_z[burn_in:], seed, burn_in, symbols[burn_in:]
    )


# --------------------------------------------------------------------------
# masses and dimensions
# --------------------------------------------------------------------------


def cylinder_mass(word, p: ProbabilityVector) -> float:
    """Product of the probabilities along a finite symbol word."""
    w = np.asarray(tuple(word), dtype=np.int64)
    if w.size == 0:
        raise ValueError("word must be nonempty")
    if np.any(w < 0) or np.any(w >= p.size):
        raise DataValidationError("word contains an out-of-range branch index")
    return float(np.prod(p.p[w]))


def ball_mass(measure: EmpiricalMeasure, center, r: float) -> float:
    """Fraction of sample points within Euclidean distance r of center."""
    if r <= 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float)
    d2 = (measure.t - c[0]) ** 2 + np.sum((measure.z - c[1:]) ** 2, axis=1)
    return float(np.count_nonzero(d2 <= r * r)) / measure.n


@dataclass(frozen=True)
class LocalDimReport:
    """Per-center slopes of log ball mass against log radius."""

    slopes: np.ndarray
    r2: np.ndarray
    radii: np.ndarray
    median: float
    dropped_radii: int
    notes: tuple


def default_radii(measure: EmpiricalMeasure, j_lo: int = 3, j_hi: int = 10) -> np.ndarray:
    pts = measure.points()
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return diam * 2.0 ** (-np.arange(j_lo, j_hi + 1, dtype=float))


def local_dimension(measure: EmpiricalMeasure, centers, radii) -> LocalDimReport:
    """Scaling exponent of ball masses at each center.

    Radii must descend through at least 4 values spanning 1.5 decades.
    Radii with empty balls are dropped per center (noted); the aggregate is
    the median slope, the usual empirical proxy for the measure dimension.
    Ball counting runs on a thread pool capped by FIFLAB_THREADS.
    """
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    if radii.size < 4:
        raise ValueError("need at least 4 radii")
    if np.log10(radii[0] / radii[-1]) < 1.5:
        raise ValueError("radii must span at least 1.5 decades")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    t = measure.t
    z = measure.z
    n = measure.n
    r2col = (radii * radii)[None, :]

    def one_center(c):
        d2 = (t - c[0]) ** 2 + np.sum((z - c[1:]) ** 2, axis=1)
        counts = np.count_nonzero(d2[:, None] <= r2col, axis=0)
        keep = counts > 0
        if np.count_nonzero(keep) < 2:
            return np.nan, np.nan, int(np.count_nonzero(~keep))
        fit = loglog_fit(radii[keep], counts[keep] / n)
        return fit.slope, fit.r2, int(np.count_nonzero(~keep))

    workers = thread_count(limit=centers.shape[0])
    if workers > 1 and centers.shape[0] > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_center, centers))
    else:
        results = [one_center(c) for c in centers]
    slopes = np.array([r[0] for r in results])
    r2 = np.array([r[1] for r in results])
    dropped = int(sum(r[2] for r in results))
    notes = []
    if dropped:
        notes.append(f"dropped {dropped} empty-ball radii across centers")
    good = slopes[np.isfinite(slopes)]
    median = float(np.median(good)) if good.size else float("nan")
    return LocalDimReport(slopes, r2, radii, median, dropped, tuple(notes))


def entropy_dimension_bound(p: ProbabilityVector, upper_ratios) -> float:
    """Entropy-over-log-contraction upper bound for the measure dimension.

    Returns sum(p_k log p_k) / sum(p_k log C_k); both sums are negative for
    valid inputs, so the bound is positive.
    """
    C = np.asarray(upper_ratios, dtype=float)
    if C.shape != p.p.shape:
        raise ValueError("need one contraction ratio per branch")
    if np.any(C <= 0.0) or np.any(C >= 1.0):
        raise ValueError("contraction ratios must lie strictly in (0, 1)")
    return float(np.sum(p.p * np.log(p.p)) / np.sum(p.p * np.log(C)))


@dataclass(frozen=True)
class MeasureBounds:
    """Moran bracket and entropy bound for the invariant measure dimension."""

    lower: float | None
    upper: float
    entropy_bound: float
    operative_upper: float
    degenerate_lower: bool
    notes: tuple

    def to_dict(self):
        return {
            "r": self.lower,
            "R": self.upper,
            "entropy_bound": self.entropy_bound,
            "operative_upper": self.operative_upper,
            "degenerate_lower": self.degenerate_lower,
            "notes": list(self.notes),
        }


def measure_dim_bounds(system: FifSystem, p: ProbabilityVector) -> MeasureBounds:
    """Theoretical dimension bounds r <= dim <= min(R, entropy bound).

    r and R solve the Moran equations over the lower/upper branch
    contraction ratios; the lower bound is omitted (with a flag) when any
    scaling is zero and the lower ratios degenerate.
    """
    ratios = contraction_ratios(system)
    notes = [_EUCLIDEAN_NOTE]
    if ratios.any_degenerate:
        lower = None
        degenerate = True
        notes.append("zero scaling on some branch: lower Moran bound omitted")
    else:
        lower = moran_solve(ratios.lower).s
        degenerate = False
    upper = moran_solve(ratios.upper).s
    entropy = entropy_dimension_bound(p, ratios.upper)
    return MeasureBounds(
        lower, upper, entropy, min(upper, entropy), degenerate, tuple(notes)
    )
