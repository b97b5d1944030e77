"""Vector-valued fractal interpolation systems.

A system is built from knots ``x_0 < ... < x_{N-1}`` with values in R^M.
Branch ``k`` (0-based, ``k = 0..N-2``) carries the whole interval
``J = [x_0, x_{N-1}]`` affinely onto ``[x_k, x_{k+1}]`` and acts on values by
``z -> scaling_k * z + forcing_k(t)``.  The attractor of the branch maps is
the graph of a continuous function interpolating the data; this module
renders that function as a dense sample and evaluates exact graph points by
address recursion.
"""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, DataValidationError, GridError, ScalingError

# Relative tolerance used to snap branch preimages onto grid nodes.
_SNAP_REL = 1e-12

Address = tuple  # finite word of 0-based branch indices


# --------------------------------------------------------------------------
# data types
# --------------------------------------------------------------------------


class InterpolationData:
    """Strictly increasing knots with one M-vector value per knot (N >= 3)."""

    def __init__(self, knots, values):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if knots.ndim != 1 or knots.size < 3:
            raise DataValidationError("need at least 3 knots")
        if not np.all(np.diff(knots) > 0):
            raise DataValidationError("knots must be strictly increasing")
        if values.ndim != 2 or values.shape[0] != knots.size:
            raise DataValidationError("values must supply one vector per knot")
        if values.shape[1] < 1:
            raise DataValidationError("codomain dimension must be >= 1")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
            raise DataValidationError("knots and values must be finite")
        self.knots = knots
        self.values = values

    @property
    def count(self) -> int:
        return self.knots.size

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def span(self) -> float:
        return float(self.knots[-1] - self.knots[0])

    def __repr__(self):
        return f"InterpolationData(N={self.count}, M={self.dimension})"


class ForcingFunction:
    """Continuous forcing term of one branch, evaluable on all of J.

    Subclasses return an ``(n, M)`` array for an ``(n,)`` argument and an
    ``(M,)`` array for a scalar.
    """

    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def _wrap(self, t, out):
        return out[0] if np.isscalar(t) or np.ndim(t) == 0 else out


class AffineForcing(ForcingFunction):
    """Vector-affine forcing ``q(t) = intercept + slope * t``."""

    kind = "affine"

    def __init__(self, intercept, slope):
        self.intercept = np.atleast_1d(np.asarray(intercept, dtype=float))
        self.slope = np.atleast_1d(np.asarray(slope, dtype=float))

    def __call__(self, t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = self.intercept[None, :] + ts[:, None] * self.slope[None, :]
        return self._wrap(t, out)


class PolynomialForcing(ForcingFunction):
    """Componentwise polynomial forcing; ``coefficients[j, m]`` scales t**j."""

    kind = "polynomial"

    def __init__(self, coefficients):
        c = np.asarray(coefficients, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        self.coefficients = c

    def __call__(self, t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((ts.size, self.coefficients.shape[1]))
        for row in self.coefficients[::-1]:
            out = out * ts[:, None] + row[None, :]
        return self._wrap(t, out)


class SampledForcing(ForcingFunction):
    """Forcing given by samples on a sorted node grid, linear in between.

    ``uniform`` constructs the common case of equally spaced nodes.
    """

    kind = "sampled"

    def __init__(self, nodes, samples):
        nodes = np.asarray(nodes, dtype=float)
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        if nodes.ndim != 1 or nodes.size < 2 or samples.shape[0] != nodes.size:
            raise DataValidationError("sampled forcing needs matching nodes/samples")
        if not np.all(np.diff(nodes) > 0):
            raise DataValidationError("forcing nodes must be strictly increasing")
        self.nodes = nodes
        self.samples = samples

    @classmethod
    def uniform(cls, start, stop, samples):
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        return cls(np.linspace(start, stop, n), samples)

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.nodes)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    def __call__(self, t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((ts.size, self.samples.shape[1]))
        for m in range(self.samples.shape[1]):
            out[:, m] = np.interp(ts, self.nodes, self.samples[:, m])
        return self._wrap(t, out)


@dataclass(frozen=True)
class FifBranch:
    """One branch map: base map ``t -> slope*t + offset`` plus vertical action."""

    slope: float
    offset: float
    scaling: float
    forcing: ForcingFunction

    def map_point(self, t):
        return self.slope * np.asarray(t, dtype=float) + self.offset

    def invert(self, t):
        return (np.asarray(t, dtype=float) - self.offset) / self.slope


class FifSystem:
    """Interpolation data plus its N-1 branch maps.

    The constructor only enforces structure (branch count); inequality
    invariants are reported by :func:`validate_system` so that broken
    systems can still be inspected.
    """

    def __init__(self, data: InterpolationData, branches):
        branches = tuple(branches)
        if len(branches) != data.count - 1:
            raise DataValidationError(
                f"expected {data.count - 1} branches, got {len(branches)}"
            )
        self.data = data
        self.branches = branches

    @property
    def slopes(self) -> np.ndarray:
        return np.array([b.slope for b in self.branches])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([b.offset for b in self.branches])

    @property
    def scalings(self) -> np.ndarray:
        return np.array([b.scaling for b in self.branches])

    @property
    def slope_min(self) -> float:
        return float(np.min(np.abs(self.slopes)))

    @property
    def slope_max(self) -> float:
        return float(np.max(np.abs(self.slopes)))

    @property
    def scaling_max(self) -> float:
        return float(np.max(np.abs(self.scalings)))

    def __repr__(self):
        return (
            f"FifSystem(N={self.data.count}, M={self.data.dimension}, "
            f"scaling_max={self.scaling_max:.3g})"
        )


@dataclass
class GraphSample:
    """Dense sample of a function on J: sorted grid, values, and an
    a-posteriori sup-norm error bound for rendered fixed points."""

    grid: np.ndarray
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        self.values = v

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @property
    def size(self) -> int:
        return self.grid.size

    def value_at(self, t):
        """Linear interpolation between grid samples."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty((ts.size, self.dimension))
        for m in range(self.dimension):
            out[:, m] = np.interp(ts, self.grid, self.values[:, m])
        return out[0] if np.ndim(t) == 0 else out

    def points(self) -> np.ndarray:
        """Graph points as an (n, 1+M) array."""
        return np.column_stack([self.grid, self.values])

    def component(self, i: int) -> "GraphSample":
        return GraphSample(self.grid, self.values[:, i], self.iterations, self.residual)


# --------------------------------------------------------------------------
# construction
# --------------------------------------------------------------------------


def derive_base_maps(data: InterpolationData):
    """Affine base-map coefficients pinned by the endpoint conditions.

    Branch k must carry x_0 to x_k and x_{N-1} to x_{k+1}; for affine maps
    that forces slope (x_{k+1}-x_k)/(x_{N-1}-x_0) and offset
    (x_{N-1}*x_k - x_0*x_{k+1})/(x_{N-1}-x_0).  Returns (slopes, offsets).
    """
    x = data.knots
    span = x[-1] - x[0]
    slopes = np.diff(x) / span
    offsets = (x[-1] * x[:-1] - x[0] * x[1:]) / span
    return slopes, offsets


def _affine_forcing_unchecked(data: InterpolationData, s: np.ndarray):
    x0, x1 = data.knots[0], data.knots[-1]
    left = data.values[:-1] - s[:, None] * data.values[0]
    right = data.values[1:] - s[:, None] * data.values[-1]
    slope = (right - left) / (x1 - x0)
    intercept = left - slope * x0
    return [AffineForcing(intercept[k], slope[k]) for k in range(s.size)]


def affine_forcing(data: InterpolationData, scalings):
    """Unique vector-affine forcings through the two endpoint constraints.

    Branch k's forcing must hit y_k - s_k*y_0 at x_0 and y_{k+1} - s_k*y_last
    at x_{N-1}.  Raises ScalingError if any |s_k| >= 1.
    """
    s = np.asarray(scalings, dtype=float)
    if s.shape != (data.count - 1,):
        raise DataValidationError("need one scaling per branch")
    if np.any(np.abs(s) >= 1.0):
        raise ScalingError("scaling factors must satisfy |s| < 1")
    return _affine_forcing_unchecked(data, s)


def build_system(data: InterpolationData, scalings, forcings=None, strict: bool = True) -> FifSystem:
    """Assemble a FifSystem, deriving base maps and (by default) affine
    forcings from the data.  Pass explicit forcings for polynomial or
    sampled variants; endpoint conformance is then checked by
    :func:`validate_system` rather than enforced here.  ``strict=False``
    skips the scaling-range check so broken systems can be assembled for
    inspection."""
    scalings = np.asarray(scalings, dtype=float)
    if strict and np.any(np.abs(scalings) >= 1.0):
        raise ScalingError("scaling factors must satisfy |s| < 1")
    slopes, offsets = derive_base_maps(data)
    if forcings is None:
        forcings = _affine_forcing_unchecked(data, scalings)
    if len(forcings) != data.count - 1:
        raise DataValidationError("need one forcing per branch")
    branches = [
        FifBranch(float(slopes[k]), float(offsets[k]), float(scalings[k]), forcings[k])
        for k in range(data.count - 1)
    ]
    return FifSystem(data, branches)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str
    branch: int | None
    magnitude: float
    detail: str

    def to_dict(self):
        return {
            "kind": self.kind,
            "branch": self.branch,
            "magnitude": self.magnitude,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "valid": self.valid,
            "violations": [v.to_dict() for v in self.violations],
        }


def validate_system(system: FifSystem, endpoint_tol: float = 1e-9) -> ValidationReport:
    """Report every violated invariant of the system; empty report == valid.

    Checks scaling magnitudes, base-map endpoint pinning, branch image
    disjointness, and the forcing endpoint conditions within
    ``endpoint_tol``.
    """
    data = system.data
    x = data.knots
    violations = []
    span = data.span
    for k, br in enumerate(system.branches):
        if abs(br.scaling) >= 1.0:
            violations.append(
                Violation(
                    "scaling", k, abs(br.scaling),
                    f"|scaling|={abs(br.scaling):.6g} >= 1 on branch {k}",
                )
            )
        err = max(
            abs(br.map_point(x[0]) - x[k]), abs(br.map_point(x[-1]) - x[k + 1])
        )
        if err > 1e-12 * span:
            violations.append(
                Violation(
                    "base_map", k, float(err),
                    f"base map of branch {k} misses its knot endpoints by {err:.3g}",
                )
            )
        if abs(br.slope) >= 1.0:
            violations.append(
                Violation(
                    "base_map", k, abs(br.slope),
                    f"|base slope|={abs(br.slope):.6g} >= 1 on branch {k}",
                )
            )
        want_left = data.values[k] - br.scaling * data.values[0]
        want_right = data.values[k + 1] - br.scaling * data.values[-1]
        got_left = np.atleast_1d(br.forcing(x[0]))
        got_right = np.atleast_1d(br.forcing(x[-1]))
        for side, want, got in (("left", want_left, got_left), ("right", want_right, got_right)):
            err = float(np.linalg.norm(got - want))
            if err > endpoint_tol:
                violations.append(
                    Violation(
                        "endpoint", k, err,
                        f"forcing endpoint mismatch ({side}) on branch {k}: {err:.3g}",
                    )
                )
    # branch images must tile J without interior overlap
    los = np.array([b.map_point(x[0]) for b in system.branches])
    his = np.array([b.map_point(x[-1]) for b in system.branches])
    for k in range(len(system.branches) - 1):
        gap = los[k + 1] - his[k]
        if gap < -1e-12 * span:
            violations.append(
                Violation(
                    "overlap", k, float(-gap),
                    f"branches {k} and {k + 1} overlap by {-gap:.3g}",
                )
            )
    return ValidationReport(tuple(violations))


# --------------------------------------------------------------------------
# the function-space contraction and its fixed point
# --------------------------------------------------------------------------


def _branch_of(system: FifSystem, ts: np.ndarray) -> np.ndarray:
    x = system.data.knots
    return np.clip(np.searchsorted(x, ts, side="right") - 1, 0, x.size - 2)


def rb_apply(system: FifSystem, sample: GraphSample) -> GraphSample:
    """One application of the graph contraction to a sampled function.

    For t in branch k's image the output is
    ``scaling_k * f(t') + forcing_k(t')`` with ``t'`` the branch preimage of
    t, reading f by linear interpolation between grid samples.  The output
    lives on the same grid.
    """
    x = system.data.knots
    grid = sample.grid
    span = system.data.span
    if grid[0] > x[0] + 1e-9 * span or grid[-1] < x[-1] - 1e-9 * span:
        raise GridError("sample grid does not cover the interpolation interval")
    ks = _branch_of(system, grid)
    slopes = system.slopes[ks]
    offsets = system.offsets[ks]
    pre = np.clip((grid - offsets) / slopes, x[0], x[-1])
    out = np.empty_like(sample.values)
    for m in range(sample.dimension):
        out[:, m] = np.interp(pre, grid, sample.values[:, m])
    out *= system.scalings[ks][:, None]
    for k, br in enumerate(system.branches):
        mask = ks == k
        if np.any(mask):
            out[mask] += np.atleast_2d(br.forcing(pre[mask]))
    return GraphSample(
        grid, out, sample.iterations + 1, system.scaling_max * sample.residual
    )


def _address_grid(system: FifSystem, grid_size: int) -> np.ndarray:
    """Knot-image grid closed under branch preimages.

    Width-priority subdivision: repeatedly split the widest cell (an image
    of J under a word of branch maps) into its N-1 children, collecting the
    images of every knot, until the point budget is reached.  Widest-first
    with FIFO tiebreak guarantees that whenever a cell with word k*w is in
    the tree so is w, hence every grid point's branch preimage is itself a
    grid point and the fixed-point iteration needs no interpolation.
    """
    knots = system.data.knots
    slopes = system.slopes
    offsets = system.offsets
    span = system.data.span
    pts = [knots]
    # heap entries: (-cell width, creation counter, word slope A, word offset D)
    heap = [(-span, 0, 1.0, 0.0)]
    counter = 1
    total = knots.size
    new_per_cell = max(knots.size - 2, 1)
    while heap and total < grid_size:
        _, _, A, D = heapq.heappop(heap)
        for ak, dk in zip(slopes, offsets):
            A2 = A * ak
            D2 = A * dk + D
            pts.append(A2 * knots + D2)
            heapq.heappush(heap, (-abs(A2) * span, counter, A2, D2))
            counter += 1
            total += new_per_cell
    grid = np.unique(np.concatenate(pts))
    # merge near-duplicates produced by different word orderings
    keep = np.empty(grid.size, dtype=bool)
    keep[0] = True
    np.greater(np.diff(grid), _SNAP_REL * span, out=keep[1:])
    grid = grid[keep]
    # the merge may have kept an ulp-off neighbor instead of an exact knot;
    # snap the survivors so the grid contains every knot exactly
    idx = np.clip(np.searchsorted(grid, knots), 0, grid.size - 1)
    idx = np.where(
        (idx > 0)
        & (np.abs(grid[np.maximum(idx - 1, 0)] - knots) < np.abs(grid[idx] - knots)),
        idx - 1,
        idx,
    )
    grid[idx] = knots
    return grid


def _preimage_table(system: FifSystem, grid: np.ndarray):
    """Branch index and interpolation stencil of each grid point's preimage.

    Returns (ks, lo, hi, w, pre) with the preimage value read as
    f[lo]*(1-w) + f[hi]*w.  On an address-closed grid every preimage snaps
    to a node and w is exactly 0.
    """
    x = system.data.knots
    span = system.data.span
    ks = _branch_of(system, grid)
    pre = np.clip((grid - system.offsets[ks]) / system.slopes[ks], x[0], x[-1])
    idx = np.clip(np.searchsorted(grid, pre), 1, grid.size - 1)
    lo = idx - 1
    hi = idx
    w = (pre - grid[lo]) / (grid[hi] - grid[lo])
    snap_hi = np.abs(grid[hi] - pre) <= _SNAP_REL * span
    snap_lo = np.abs(grid[lo] - pre) <= _SNAP_REL * span
    lo = np.where(snap_hi, hi, lo)
    w = np.where(snap_hi, 0.0, np.where(snap_lo, 0.0, w))
    hi = np.where(snap_lo | snap_hi, lo, hi)
    return ks, lo, hi, w, pre


def evaluate_fif(
    system: FifSystem,
    grid_size: int = 8192,
    tol: float = 1e-9,
    max_iter: int = 400,
) -> GraphSample:
    """Render the interpolating fixed point on an address-closed grid.

    Iterates the graph contraction from the piecewise-linear interpolant of
    the data until the sup-norm step is below ``tol*(1-s)/s`` (s the largest
    scaling magnitude), so the returned ``residual`` field, the geometric
    a-posteriori bound ``s/(1-s) * step``, is at most ``tol``.  The grid
    contains all knots and all first-level knot images; because it is closed
    under branch preimages the iteration reads nodal values exactly and the
    rendered values coincide with the true fixed point up to ``residual``
    and roundoff.
    """
    data = system.data
    if grid_size < 2 * data.count:
        raise GridError("grid_size must be at least 2N")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if system.scaling_max >= 1.0:
        raise ScalingError("cannot render: some |scaling| >= 1")
    grid = _address_grid(system, grid_size)
    ks, lo, hi, w, pre = _preimage_table(system, grid)
    scal = system.scalings[ks][:, None]
    wcol = w[:, None]
    qvals = np.empty((grid.size, data.dimension))
    for k, br in enumerate(system.branches):
        mask = ks == k
        if np.any(mask):
            qvals[mask] = np.atleast_2d(br.forcing(pre[mask]))
    f = np.empty((grid.size, data.dimension))
    for m in range(data.dimension):
        f[:, m] = np.interp(grid, data.knots, data.values[:, m])

    smax = system.scaling_max
    threshold = np.inf if smax == 0.0 else tol * (1.0 - smax) / smax
    step = np.inf
    iterations = 0
    while iterations < max_iter:
        f_new = scal * (f[lo] * (1.0 - wcol) + f[hi] * wcol) + qvals
        step = float(np.max(np.linalg.norm(f_new - f, axis=1)))
        f = f_new
        iterations += 1
        if step <= threshold:
            break
    residual = 0.0 if smax == 0.0 else smax / (1.0 - smax) * step
    if step > threshold:
        warnings.warn(
            f"fixed-point iteration stopped at {iterations} iterations with "
            f"residual bound {residual:.3g} > tol {tol:.3g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return GraphSample(grid, f, iterations, residual)


def evaluate_at_address(system: FifSystem, address, knot_index: int):
    """Exact graph point reached by applying the word of branch maps to a knot.

    The word is applied right to left (innermost letter first), so the point
    is W_{a_0}(W_{a_1}(...W_{a_last}(knot)...)).  An empty address returns
    the knot itself.  Knot indices are 0-based.
    """
    data = system.data
    if not 0 <= knot_index < data.count:
        raise DataValidationError(f"knot index {knot_index} out of range")
    t = float(data.knots[knot_index])
    z = data.values[knot_index].copy()
    for k in reversed(tuple(address)):
        if not 0 <= k < len(system.branches):
            raise DataValidationError(f"branch index {k} out of range")
        br = system.branches[k]
        z = br.scaling * z + np.atleast_1d(br.forcing(t))
        t = br.slope * t + br.offset
    return t, z


@dataclass(frozen=True)
class ContractionRatios:
    """Per-branch Lipschitz bounds of the branch maps in the graph metric.

    ``upper`` is max(|base slope|, |scaling|), ``lower`` the min; both are
    exact for affine base maps with constant scaling.  ``degenerate`` marks
    branches with zero scaling, where the lower bound collapses to 0 and the
    lower Moran root is uninformative.
    """

    lower: np.ndarray
    upper: np.ndarray
    degenerate: np.ndarray

    @property
    def any_degenerate(self) -> bool:
        return bool(np.any(self.degenerate))


def contraction_ratios(system: FifSystem) -> ContractionRatios:
    a = np.abs(system.slopes)
    s = np.abs(system.scalings)
    return ContractionRatios(np.minimum(a, s), np.maximum(a, s), s == 0.0)


@dataclass(frozen=True)
class SelfReferenceResidual:
    """Worst-case defect of the self-referential equation on a sample.

    ``on_grid`` is evaluated only at grid points whose branch image is
    itself a grid point (both sides read exactly); ``interpolated`` covers
    the remaining points, where the image value is linearly interpolated and
    picks up an O(grid spacing^holder) term for rough functions.
    """

    on_grid: float
    interpolated: float
    checked_fraction: float


def self_referential_residual(system: FifSystem, sample: GraphSample) -> SelfReferenceResidual:
    """Max over branches k and grid t of |f(image_k(t)) - scaling_k f(t) - forcing_k(t)|."""
    grid = sample.grid
    span = system.data.span
    worst_exact = 0.0
    worst_interp = 0.0
    n_exact = 0
    n_total = 0
    for br in system.branches:
        img = br.map_point(grid)
        rhs = br.scaling * sample.values + np.atleast_2d(br.forcing(grid))
        idx = np.clip(np.searchsorted(grid, img), 1, grid.size - 1)
        near = np.where(
            np.abs(grid[idx] - img) <= np.abs(img - grid[idx - 1]), idx, idx - 1
        )
        snapped = np.abs(grid[near] - img) <= _SNAP_REL * span
        err = np.linalg.norm(sample.values[near] - rhs, axis=1)
        if np.any(snapped):
            worst_exact = max(worst_exact, float(err[snapped].max()))
        if np.any(~snapped):
            lhs = sample.value_at(img[~snapped])
            err_i = np.linalg.norm(lhs - rhs[~snapped], axis=1)
            worst_interp = max(worst_interp, float(err_i.max()))
        n_exact += int(np.count_nonzero(snapped))
        n_total += grid.size
    return SelfReferenceResidual(worst_exact, worst_interp, n_exact / max(n_total, 1))
