"""Dimension estimators and function-space membership checks.

Theoretical bounds come from Moran equations on the branch contraction
ratios; empirical estimates come from mesh box counts over point clouds and
from oscillation sums over windows of a sampled graph.  The membership
predicates evaluate the inequalities under which the rendered function is
known to be Holder, of bounded variation, absolutely continuous, or of
bounded dyadic oscillation sums.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import FifSystem, GraphSample, evaluate_fif
from .errors import UnsupportedCaseError
from .util import decade_span, loglog_fit, thread_count

log = logging.getLogger(__name__)

_DYADIC_TOL = 1e-12


# --------------------------------------------------------------------------
# Moran roots
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MoranRoot:
    """Unique s >= 0 with sum(ratios**s) == 1, found by bisection."""

    s: float
    residual: float
    iterations: int


def moran_solve(ratios, tol: float = 1e-12) -> MoranRoot:
    """Solve sum(ratios**s) = 1 for the unique nonnegative root.

    The ratios must lie strictly in (0, 1), so s -> sum(ratios**s) is
    strictly decreasing from len(ratios) at s=0; bisection is derivative
    free and immune to log-domain issues.
    """
    r = np.asarray(ratios, dtype=float)
    if r.size == 0:
        raise ValueError("need at least one ratio")
    if np.any(r <= 0.0) or np.any(r >= 1.0):
        raise ValueError("ratios must lie strictly in (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")

    def g(s):
        return float(np.sum(r**s))

    if r.size == 1:
        return MoranRoot(0.0, abs(g(0.0) - 1.0), 0)
    lo, hi = 0.0, 1.0
    while g(hi) > 1.0:
        lo = hi
        hi *= 2.0
    s = 0.5 * (lo + hi)
    res = abs(g(s) - 1.0)
    iterations = 0
    while res > tol and iterations < 200:
        if g(s) > 1.0:
            lo = s
        else:
            hi = s
        s = 0.5 * (lo + hi)
        res = abs(g(s) - 1.0)
        iterations += 1
    return MoranRoot(s, res, iterations)


# --------------------------------------------------------------------------
# box counting
# --------------------------------------------------------------------------


@dataclass
class DimensionReport:
    """Log-log regression of counts against scale with bounds attached."""

    method: str
    scales: np.ndarray
    counts: np.ndarray
    slope: float
    intercept: float
    r2: float
    bounds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "method": self.method,
            "scales": [float(v) for v in self.scales],
            "counts": [float(v) for v in self.counts],
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
        }
        if self.bounds:
            out["bounds"] = dict(self.bounds)
        if self.notes:
            out["notes"] = list(self.notes)
        for key, val in self.extras.items():
            out[key] = val
        return out


def default_scales(extent: float, j_lo: int = 3, j_hi: int = 11) -> np.ndarray:
    """Dyadic scale ladder extent * 2**-j for j in [j_lo, j_hi]."""
    return extent * 2.0 ** (-np.arange(j_lo, j_hi + 1, dtype=float))


def _occupied_cells(points: np.ndarray, mins: np.ndarray, delta: float) -> int:
    idx = np.floor((points - mins) / delta).astype(np.int64)
    dims = idx.max(axis=0) + 1
    if np.prod(dims.astype(object)) < 2**62:
        keys = np.ravel_multi_index(tuple(idx.T), tuple(int(d) for d in dims))
        return int(np.unique(keys).size)
    return int(np.unique(idx, axis=0).shape[0])


def box_count_mesh(points, deltas, offsets: int = 1) -> DimensionReport:
    """Occupied-cell counts of the axis-aligned mesh at each scale.

    With the default single anchor the mesh sits at the pointwise minimum,
    halving delta refines cells exactly, and counts are monotone across the
    ladder.  ``offsets > 1`` averages counts over that many shifted anchors
    per scale, trading the exact nesting for lower grid-placement noise.
    The slope of log N against -log delta estimates the box dimension of
    the sampled set.  Counting parallelizes over the scale/offset grid,
    capped by FIFLAB_THREADS.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be an (n, d) array")
    if pts.shape[0] < 1000:
        raise ValueError("need at least 1000 points for a mesh count")
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size < 5:
        raise ValueError("need at least 5 scales")
    if decade_span(deltas) < 1.5:
        raise ValueError("scales must span at least 1.5 decades")
    deltas = np.sort(deltas)[::-1]
    mins = pts.min(axis=0)
    shifts = np.arange(offsets) / offsets
    jobs = [(d, o) for d in deltas for o in shifts]

    def count(job):
        d, o = job
        return _occupied_cells(pts, mins - o * d, d)

    workers = thread_count(limit=len(jobs))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(count, jobs))
    else:
        raw = [count(j) for j in jobs]
    counts = np.asarray(raw, dtype=float).reshape(deltas.size, offsets).mean(axis=1)
    fit = loglog_fit(1.0 / deltas, counts)
    return DimensionReport(
        "mesh", deltas, counts, fit.slope, fit.intercept, fit.r2
    )


# --------------------------------------------------------------------------
# oscillation machinery
# --------------------------------------------------------------------------


def _window_oscillations(sample: GraphSample, edges: np.ndarray) -> np.ndarray:
    """Sup-inf of the sampled function over consecutive windows.

    Window j is [edges[j], edges[j+1]], closed on both sides; the value at
    each edge is included by interpolation so piecewise-linear inputs give
    their exact oscillation.  Vector samples combine componentwise
    oscillations by the Euclidean norm.
    """
    grid = sample.grid
    vals = sample.values
    m = edges.size - 1
    edge_vals = sample.value_at(edges)
    starts = np.searchsorted(grid, edges[:-1], side="left")
    ends = np.searchsorted(grid, edges[1:], side="right")
    osc2 = np.zeros(m)
    for c in range(vals.shape[1]):
        col = vals[:, c]
        ev = edge_vals[:, c]
        hi = np.maximum(ev[:-1], ev[1:])
        lo = np.minimum(ev[:-1], ev[1:])
        nonempty = ends > starts
        if np.any(nonempty):
            idx = np.flatnonzero(nonempty)
            red_starts = starts[idx]
            seg_max = np.maximum.reduceat(col, red_starts)
            seg_min = np.minimum.reduceat(col, red_starts)
            # reduceat segments run to the next start; trim to window ends
            for pos, j in enumerate(idx):
                s, e = starts[j], ends[j]
                nxt = red_starts[pos + 1] if pos + 1 < idx.size else col.size
                if e != nxt:
                    seg_max[pos] = col[s:e].max()
                    seg_min[pos] = col[s:e].min()
            hi[idx] = np.maximum(hi[idx], seg_max)
            lo[idx] = np.minimum(lo[idx], seg_min)
        osc2 += (hi - lo) ** 2
    return np.sqrt(osc2)


def oscillation_sum(sample: GraphSample, delta: float, component: int | None = None) -> float:
    """Sum of window oscillations over consecutive width-delta windows.

    For a graph this sum times 1/delta lower-bounds the delta-box count and,
    with 2*ceil(|J|/delta) added, upper-bounds it.  Values for delta below
    3x the grid spacing are flagged unreliable in the log.
    """
    f = sample if component is None else sample.component(component)
    grid = f.grid
    extent = grid[-1] - grid[0]
    if not 0.0 < delta < extent:
        raise ValueError("delta must lie in (0, |J|)")
    spacing = float(np.max(np.diff(grid)))
    if delta < 3.0 * spacing:
        log.info("oscillation_sum: delta=%g below 3x grid spacing %g, unreliable", delta, spacing)
    m = int(np.ceil(extent / delta - 1e-9))
    edges = grid[0] + delta * np.arange(m + 1)
    edges = np.minimum(edges, grid[-1])
    return float(np.sum(_window_oscillations(f, edges)))


def box_count_oscillation(sample: GraphSample, deltas, component: int = 0) -> DimensionReport:
    """Box counts of one component graph from windowed oscillation sums.

    counts = 2*ceil(|J|/delta) + oscillation_sum/delta (upper variant); the
    bare oscillation_sum/delta lower variant is fitted too and reported in
    ``extras['slope_lower']``.
    """
    deltas = np.asarray(deltas, dtype=float)
    if deltas.size < 5:
        raise ValueError("need at least 5 scales")
    if decade_span(deltas) < 1.5:
        raise ValueError("scales must span at least 1.5 decades")
    deltas = np.sort(deltas)[::-1]
    f = sample.component(component)
    extent = f.grid[-1] - f.grid[0]
    spacing = float(np.max(np.diff(f.grid)))
    notes = []
    reliable = deltas >= 3.0 * spacing
    if not np.all(reliable):
        notes.append(
            f"dropped {int(np.count_nonzero(~reliable))} scales below 3x grid spacing"
        )
        deltas = deltas[reliable]
        if deltas.size < 5:
            raise ValueError("too few reliable scales above 3x grid spacing")
    sums = np.array([oscillation_sum(f, d) for d in deltas])
    m = np.ceil(extent / deltas - 1e-9)
    upper = 2.0 * m + sums / deltas
    lower = sums / deltas
    fit = loglog_fit(1.0 / deltas, upper)
    report = DimensionReport(
        "oscillation", deltas, upper, fit.slope, fit.intercept, fit.r2, notes=notes
    )
    if np.all(lower > 0):
        low_fit = loglog_fit(1.0 / deltas, lower)
        report.extras["slope_lower"] = low_fit.slope
        report.extras["counts_lower"] = [float(v) for v in lower]
    else:
        report.notes.append("lower-variant counts hit zero; lower slope omitted")
    return report


# --------------------------------------------------------------------------
# roughness functionals
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class HolderEstimate:
    """Scaling exponent of the largest window oscillation against width."""

    exponent: float
    r2: float
    widths: np.ndarray
    max_oscillations: np.ndarray
    flagged: bool

    @property
    def constant(self) -> float:
        """Ladder seminorm max osc / width**exponent."""
        return float(np.max(self.max_oscillations / self.widths**self.exponent))

    def constant_at(self, exponent: float) -> float:
        return float(np.max(self.max_oscillations / self.widths**exponent))


def holder_estimate(sample: GraphSample, n_levels: int = 8) -> HolderEstimate:
    """Estimate the Holder exponent of a dense sample.

    Fits the slope of log(max window oscillation) against log(width) over a
    dyadic ladder of window widths.  The estimate is clipped into (0, 1];
    non-monotone oscillation scaling or a poor fit is flagged.
    """
    grid = sample.grid
    extent = grid[-1] - grid[0]
    spacing = float(np.max(np.diff(grid)))
    widths = []
    maxosc = []
    for n in range(1, n_levels + 1):
        w = extent * 2.0**-n
        if w < 4.0 * spacing:
            break
        edges = grid[0] + w * np.arange(2**n + 1)
        edges = np.minimum(edges, grid[-1])
        maxosc.append(float(np.max(_window_oscillations(sample, edges))))
        widths.append(w)
    if len(widths) < 4:
        raise ValueError("sample too coarse for a Holder ladder (need 4 levels)")
    widths = np.asarray(widths)
    maxosc = np.asarray(maxosc)
    flagged = False
    if np.any(maxosc <= 0):
        return HolderEstimate(1.0, 0.0, widths, maxosc, True)
    fit = loglog_fit(widths, maxosc)
    if np.any(np.diff(maxosc) > 1e-12 * maxosc[0]):
        # oscillation should shrink with the window
        flagged = True
    if fit.r2 < 0.9:
        flagged = True
    exponent = min(max(fit.slope, 1e-9), 1.0)
    return HolderEstimate(exponent, fit.r2, widths, maxosc, flagged)


def total_variation(sample: GraphSample) -> float:
    """Polyline variation of the sample, a lower bound of the true total
    variation that is exact for piecewise-linear functions and monotone
    under grid refinement."""
    return float(np.sum(np.linalg.norm(np.diff(sample.values, axis=0), axis=1)))


def v_alpha_seminorm(sample: GraphSample, alpha: float, n_max: int = 12) -> float:
    """Scale-weighted dyadic oscillation seminorm.

    With the domain rescaled to unit length, level n splits it into 2**n
    windows; the seminorm is the max over levels of
    sum of window oscillations / 2**(n*(alpha-1)).  Levels whose windows
    fall below the grid spacing are clipped (logged).
    """
    if alpha < 1.0:
        raise ValueError("alpha must be >= 1")
    grid = sample.grid
    extent = grid[-1] - grid[0]
    spacing = float(np.max(np.diff(grid)))
    best = 0.0
    clipped = False
    for n in range(1, n_max + 1):
        w = extent * 2.0**-n
        if w < spacing:
            clipped = True
            break
        edges = grid[0] + w * np.arange(2**n + 1)
        edges = np.minimum(edges, grid[-1])
        level = float(np.sum(_window_oscillations(sample, edges))) / 2.0 ** (n * (alpha - 1.0))
        best = max(best, level)
    if clipped:
        log.info("v_alpha_seminorm: ladder clipped at grid resolution (n_max=%d)", n_max)
    return best


# --------------------------------------------------------------------------
# membership predicates
# --------------------------------------------------------------------------


def _dyadic_exponents(system: FifSystem):
    """Integer exponents r_k with |branch image| = |J| * 2**-r_k, or None."""
    ratios = np.abs(system.slopes)
    exps = np.round(-np.log2(ratios))
    ok = (
        np.all(exps >= 1)
        and np.all(np.abs(ratios - 2.0**-exps) <= _DYADIC_TOL)
        and abs(float(np.sum(2.0**-exps)) - 1.0) <= _DYADIC_TOL
    )
    return [int(e) for e in exps] if ok else None


@dataclass
class SpacePredicateReport:
    """Inequality checks for membership of the rendered function in the
    classical function spaces, with the witnesses used to evaluate them.

    ``two_minus_sigma`` marks the hypotheses under which the component
    graphs' box dimension is exactly 2 - sigma; its reverse-Holder lower
    bound on the forcings is estimated from samples and heuristic (an
    existentially quantified condition cannot be falsified by probing).
    """

    holder: bool
    bounded_variation: bool
    absolutely_continuous: bool
    v_alpha: bool
    two_minus_sigma: bool
    witnesses: dict
    heuristic: tuple = ("two_minus_sigma",)

    def to_dict(self):
        return {
            "holder": self.holder,
            "bounded_variation": self.bounded_variation,
            "absolutely_continuous": self.absolutely_continuous,
            "v_alpha": self.v_alpha,
            "two_minus_sigma": self.two_minus_sigma,
            "heuristic": list(self.heuristic),
            "witnesses": dict(self.witnesses),
        }


def _reverse_holder_floor(forcing, x0, x1, sigma, n_probes=257, scales=(0.25, 0.125, 0.0625, 0.03125)):
    """Empirical floor for |q_i(t1)-q_i(t2)| >= C |t1-t2|**sigma.

    For each window scale, take for every probe t1 the best ratio over
    probes t2 within that distance, then the worst t1 (lower envelope);
    the floor is the min over scales.  Returns the min over components.
    """
    ts = np.linspace(x0, x1, n_probes)
    q = np.atleast_2d(forcing(ts))
    extent = x1 - x0
    floor = np.inf
    for c in range(q.shape[1]):
        col = q[:, c]
        per_scale = []
        for frac in scales:
            radius = frac * extent
            step = max(int(round(radius / (ts[1] - ts[0]))), 1)
            best_ratio = np.full(ts.size, 0.0)
            for off in range(1, step + 1):
                dt = off * (ts[1] - ts[0])
                diff = np.abs(col[off:] - col[:-off]) / dt**sigma
                best_ratio[: ts.size - off] = np.maximum(best_ratio[: ts.size - off], diff)
                best_ratio[off:] = np.maximum(best_ratio[off:], diff)
            per_scale.append(float(best_ratio.min()))
        floor = min(floor, min(per_scale))
    return floor


def space_predicates(
    system: FifSystem,
    sigma: float,
    alpha: float = 1.0,
    sample: GraphSample | None = None,
) -> SpacePredicateReport:
    """Evaluate the membership hypotheses for the given system.

    sigma is the Holder exponent to test, alpha the dyadic-oscillation
    space parameter.  A rendered sample may be passed to avoid re-rendering
    when estimating the Holder constant of the fixed point.
    """
    n_branches = len(system.branches)
    s_max = system.scaling_max
    a_min = system.slope_min
    a_max = system.slope_max
    sum_abs = float(np.sum(np.abs(system.scalings)))

    holder_ok = s_max / a_min**sigma < 1.0
    bv_ok = s_max < 1.0 / n_branches
    ac_ok = s_max < a_min / n_branches
    dyadic = _dyadic_exponents(system)
    v_alpha_ok = sum_abs < 1.0 and dyadic is not None

    x0, x1 = system.data.knots[0], system.data.knots[-1]
    q_seminorms = []
    floors = []
    for br in system.branches:
        ts = np.linspace(x0, x1, 513)
        q = np.atleast_2d(br.forcing(ts))
        lag_best = 0.0
        for off in (1, 2, 4, 8, 16, 32, 64, 128, 256):
            dt = off * (ts[1] - ts[0])
            lag_best = max(
                lag_best, float(np.max(np.linalg.norm(q[off:] - q[:-off], axis=1)) / dt**sigma)
            )
        q_seminorms.append(lag_best)
        floors.append(_reverse_holder_floor(br.forcing, x0, x1, sigma))
    c0_hat = float(min(floors))

    osc_ok = False
    h_constant = None
    if holder_ok:
        if sample is None:
            sample = evaluate_fif(system, grid_size=4096, tol=1e-8)
        est = holder_estimate(sample)
        h_constant = est.constant_at(sigma)
        osc_ok = c0_hat * a_min**sigma > s_max * a_max**sigma * h_constant

    witnesses = {
        "scaling_max": s_max,
        "slope_min": a_min,
        "slope_max": a_max,
        "sigma": sigma,
        "alpha": alpha,
        "branch_count": n_branches,
        "sum_abs_scalings": sum_abs,
        "dyadic_exponents": dyadic,
        "forcing_holder_seminorms": [float(v) for v in q_seminorms],
        "reverse_holder_floor": c0_hat,
        "fif_holder_constant": h_constant,
    }
    return SpacePredicateReport(holder_ok, bv_ok, ac_ok, v_alpha_ok, osc_ok, witnesses)


def upper_box_cap(system: FifSystem, alpha: float, ladder: int = 4, grid_size: int = 2048):
    """Upper box-dimension cap for real-valued systems with dyadic branches.

    Returns ``alpha`` when the scalings sum below 1 in absolute value, the
    branch image lengths are dyadic fractions tiling J, and every forcing
    has finite sampled oscillation seminorm along the ladder alpha + 1/n;
    otherwise None.  Raises for vector-valued systems: component dimensions
    do not control the joint graph there, so no such cap exists.
    """
    if system.data.dimension != 1:
        raise UnsupportedCaseError(
            "box-dimension cap applies to real-valued systems only; for M >= 2 "
            "component bounds do not cap the joint graph"
        )
    if float(np.sum(np.abs(system.scalings))) >= 1.0:
        return None
    if _dyadic_exponents(system) is None:
        return None
    x0, x1 = system.data.knots[0], system.data.knots[-1]
    ts = np.linspace(x0, x1, grid_size + 1)
    for br in system.branches:
        q = GraphSample(ts, np.atleast_2d(br.forcing(ts)))
        for n in range(1, ladder + 1):
            if not np.isfinite(v_alpha_seminorm(q, alpha + 1.0 / n)):
                return None
    return alpha


# --------------------------------------------------------------------------
# projections
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionReport:
    full_slope: float
    component_slopes: tuple
    satisfied: bool


def projection_monotonicity(
    points, deltas=None, slack: float = 0.1, offsets: int = 6
) -> ProjectionReport:
    """Check that the full graph's mesh estimate dominates each component's.

    Estimates the mesh slope of the (t, z_1..z_M) cloud and of every
    (t, z_i) coordinate projection, asserting full >= max(components) minus
    estimator slack.  Occupied cells dominate the projections' exactly at
    every scale; offset averaging keeps the fitted slopes close enough to
    that ordering at sample sizes around 1e5.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 10_000:
        raise ValueError("need at least 1e4 points")
    if deltas is None:
        extent = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
        deltas = default_scales(extent, 2, 8)
    full = box_count_mesh(pts, deltas, offsets=offsets).slope
    comps = tuple(
        box_count_mesh(pts[:, [0, 1 + i]], deltas, offsets=offsets).slope
        for i in range(pts.shape[1] - 1)
    )
    return ProjectionReport(full, comps, full >= max(comps) - slack)
