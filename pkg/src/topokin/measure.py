"""Measures on trajectories: preimages of balls, traversal length, image measure.

Three different quantities live here and are never substituted for one another:

* ``lebesgue_measure_1d`` -- time spent in a parameter set;
* ``partition_arc_length`` / ``quadrature_arc_length`` -- traversal length,
  which counts retraced pieces once per pass;
* ``image_measure`` -- one-dimensional Hausdorff (arc-length) measure of the
  image *set*, each point counted once.  For injective curves it coincides
  with the traversal length; for retraced curves it is smaller.

Three-dimensional Lebesgue measure is useless here (every C^2 curve is null),
so "measure of a subset of the image" always means arc-length measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .curves import Trajectory


@dataclass(frozen=True)
class IntervalSet:
    """Sorted, pairwise-disjoint closed intervals ``(lo, hi)`` with ``lo < hi``."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        for lo, hi in ivs:
            if not lo < hi:
                raise ValueError(f"empty or reversed interval ({lo}, {hi})")
        for (_, hi), (lo, _) in zip(ivs, ivs[1:]):
            if not hi < lo:
                raise ValueError("intervals must be sorted and pairwise disjoint")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def from_pairs(cls, pairs) -> "IntervalSet":
        """Sort, drop empty pairs and merge overlapping or touching ones."""
        merged: list[list[float]] = []
        for lo, hi in sorted((float(lo), float(hi)) for lo, hi in pairs):
            if not lo < hi:
                continue
            if merged and lo <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        return cls(tuple(map(tuple, merged)))

    @classmethod
    def whole(cls, traj: Trajectory) -> "IntervalSet":
        return cls(((traj.a, traj.b),))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (t >= lo) & (t <= hi)
        return out


@dataclass(frozen=True)
class MeasureOptions:
    scan_points_per_unit_time: int = 4096
    root_tol: float = 1e-12
    rel_tol: float = 1e-8
    max_refinement_depth: int = 40
    coincide_tol: float = 1e-7
    discretization_step: float = 1e-3
    # not part of the public contract: floors that keep tiny intervals resolved
    min_segments: int = 64
    max_image_levels: int = 6

    def __post_init__(self):
        for name in ("scan_points_per_unit_time", "root_tol", "rel_tol", "max_refinement_depth",
                     "coincide_tol", "discretization_step", "min_segments"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


DEFAULT_OPTIONS = MeasureOptions()


class Estimate(float):
    """A float carrying a ``converged`` flag."""

    converged: bool

    def __new__(cls, value: float, converged: bool = True):
        obj = super().__new__(cls, value)
        obj.converged = bool(converged)
        return obj

    def __repr__(self) -> str:
        return f"Estimate({float(self)!r}, converged={self.converged})"

    def __reduce__(self):
        return (Estimate, (float(self), self.converged))


@dataclass(frozen=True)
class LengthEstimate:
    value: float
    lower_bound: float
    refinement_depth: int
    converged: bool
    history: tuple[float, ...] = field(default=(), repr=False)


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, best: float):
        self.best = best
        super().__init__(f"{message} (best estimate {best!r})")


def _pieces(traj: Trajectory, restrict) -> list[tuple[float, float]]:
    if restrict is None:
        return [(traj.a, traj.b)]
    pieces = list(restrict)
    for lo, hi in pieces:
        if lo < traj.a or hi > traj.b:
            raise ValueError(f"interval ({lo}, {hi}) outside trajectory domain")
    return pieces


def lebesgue_measure_1d(s: IntervalSet) -> float:
    return math.fsum(hi - lo for lo, hi in s)


# ---------------------------------------------------------------------------
# Preimages of balls

def _bisect(inside_fn, lo: np.ndarray, hi: np.ndarray, lo_inside: np.ndarray, tol: float) -> np.ndarray:
    """Vectorised bisection on a boolean predicate that differs at ``lo`` and ``hi``."""
    lo, hi = lo.copy(), hi.copy()
    while lo.size:
        width = hi - lo
        mid = 0.5 * (lo + hi)
        active = (width > tol) & (mid > lo) & (mid < hi)
        if not active.any():
            break
        m_in = inside_fn(mid[active])
        same = m_in == lo_inside[active]
        lo[active] = np.where(same, mid[active], lo[active])
        hi[active] = np.where(same, hi[active], mid[active])
    return 0.5 * (lo + hi)


def _hidden_dips(ts, gs, g, xatol) -> list[float]:
    """Times where ``g`` dips below zero between scan samples that are all >= 0."""
    g_l, g_c, g_r = gs[:-2], gs[1:-1], gs[2:]
    curvature = g_l - 2 * g_c + g_r
    cand = np.nonzero(
        (g_c >= 0) & (g_c <= g_l) & (g_c <= g_r) & ((g_c < g_l) | (g_c < g_r)) & (g_c <= curvature)
    )[0] + 1
    found = []
    for i in cand:
        res = minimize_scalar(lambda s: float(g(np.array([s]))[0]), bounds=(ts[i - 1], ts[i + 1]),
                              method="bounded", options={"xatol": xatol})
        if res.fun < 0:
            found.append(float(res.x))
    return found


def preimage_ball_intervals(traj: Trajectory, center, radius: float,
                            opts: MeasureOptions = DEFAULT_OPTIONS) -> IntervalSet:
    """``{t in [a, b] : |traj(t) - center| < radius}`` as an :class:`IntervalSet`.

    The squared-distance gap ``g(t) = |traj(t) - center|^2 - radius^2`` is
    scanned on a uniform grid, sign changes are bracketed and refined by
    bisection.  Sample minima that might hide a dip below zero are checked
    with a bounded 1D minimisation first.  Exact tangency contributes nothing.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    c = np.asarray(center, dtype=float).reshape(3)
    r2 = float(radius) ** 2

    def g(t):
        d = traj.position(t) - c
        out = np.einsum("...i,...i->...", d, d) - r2
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite trajectory value in preimage scan")
        return out

    n = max(3, math.ceil(opts.scan_points_per_unit_time * traj.duration) + 1)
    ts = np.linspace(traj.a, traj.b, n)
    gs = g(ts)
    dips = _hidden_dips(ts, gs, g, opts.root_tol)
    if dips:
        ts = np.concatenate([ts, dips])
        gs = np.concatenate([gs, g(np.array(dips))])
        order = np.argsort(ts, kind="stable")
        ts, gs = ts[order], gs[order]

    inside = gs < 0
    k = np.nonzero(inside[1:] != inside[:-1])[0]
    roots = _bisect(lambda t: g(t) < 0, ts[k], ts[k + 1], inside[k], opts.root_tol)

    pairs = []
    start = traj.a if inside[0] else None
    for idx, root in zip(k, roots):
        if inside[idx + 1]:
            start = float(root)
        else:
            pairs.append((start, float(root)))
            start = None
    if start is not None:
        pairs.append((start, traj.b))
    return IntervalSet.from_pairs(pairs)


# ---------------------------------------------------------------------------
# Traversal length

_MAX_PARTITION_POINTS = 1 << 24
_MIN_PARTITION_DEPTH = 6


def partition_arc_length(traj: Trajectory, restrict: IntervalSet | None = None,
                         opts: MeasureOptions = DEFAULT_OPTIONS) -> LengthEstimate:
    """Traversal length as the limit of chord sums over dyadic partitions.

    Each pass bisects every subinterval.  Chord sums are lower bounds and never
    decrease under refinement.  Stops once a full pass raises the sum by at most
    ``rel_tol`` (relative), after a minimum of six passes so that aliased
    coarse partitions (e.g. a closed loop sampled only at its endpoints) cannot
    stop the iteration.
    """
    pieces = _pieces(traj, restrict)
    if not pieces:
        return LengthEstimate(0.0, 0.0, 0, True, (0.0,))
    ts = [np.array([lo, hi]) for lo, hi in pieces]
    pts = [traj.position(t) for t in ts]
    history: list[float] = []
    converged = False
    depth = 0
    while True:
        chords = np.concatenate([np.linalg.norm(np.diff(p, axis=0), axis=1) for p in pts])
        if not np.all(np.isfinite(chords)):
            raise FloatingPointError("non-finite trajectory value in chord sum")
        total = math.fsum(chords)
        if history and depth >= _MIN_PARTITION_DEPTH and total - history[-1] <= opts.rel_tol * total:
            history.append(total)
            converged = True
            break
        history.append(total)
        npoints = sum(len(t) for t in ts)
        if depth >= opts.max_refinement_depth or 2 * npoints > _MAX_PARTITION_POINTS:
            break
        mids = [0.5 * (t[:-1] + t[1:]) for t in ts]
        mid_pts = traj.position(np.concatenate(mids))
        offset = 0
        for j, (t, p, m) in enumerate(zip(ts, pts, mids)):
            mp = mid_pts[offset:offset + len(m)]
            offset += len(m)
            new_t = np.empty(2 * len(t) - 1)
            new_t[0::2], new_t[1::2] = t, m
            new_p = np.empty((2 * len(t) - 1, 3))
            new_p[0::2], new_p[1::2] = p, mp
            ts[j], pts[j] = new_t, new_p
        depth += 1
    lower = max(history)
    return LengthEstimate(history[-1], lower, depth, converged, tuple(history))


# Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (QUADPACK qk15)
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
KRONROD_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
# Gauss points are the odd-indexed Kronrod nodes (x_1, x_3, x_5, 0, ...)
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]
GAUSS_WEIGHTS[[9, 11, 13]] = _WG[2::-1]


def quadrature_arc_length(traj: Trajectory, restrict: IntervalSet | None = None,
                          opts: MeasureOptions = DEFAULT_OPTIONS) -> float:
    """Traversal length as the integral of ``|traj'(t)|`` by adaptive Gauss-Kronrod.

    Panels are bisected level by level; a panel is accepted when
    ``|K15 - G7|`` is within its share (by width) of ``rel_tol`` times the
    current total.  Raises :class:`QuadratureError` if a panel is still
    unresolved at ``max_refinement_depth``.
    """
    pieces = _pieces(traj, restrict)
    total_width = math.fsum(hi - lo for lo, hi in pieces)
    if not pieces:
        return 0.0
    active = np.array(pieces, dtype=float)
    accepted: list[float] = []
    for depth in range(opts.max_refinement_depth + 1):
        half = 0.5 * (active[:, 1] - active[:, 0])
        mid = 0.5 * (active[:, 1] + active[:, 0])
        nodes = mid[:, None] + half[:, None] * KRONROD_NODES[None, :]
        speed = np.linalg.norm(traj.derivatives(nodes, 1)[1], axis=-1)
        if not np.all(np.isfinite(speed)):
            raise FloatingPointError("non-finite speed in quadrature")
        kron = half * (speed @ KRONROD_WEIGHTS)
        gauss = half * (speed @ GAUSS_WEIGHTS)
        err = np.abs(kron - gauss)
        estimate = math.fsum(accepted) + math.fsum(kron)
        ok = err <= opts.rel_tol * abs(estimate) * (2 * half) / total_width
        accepted.extend(kron[ok].tolist())
        if ok.all():
            return math.fsum(accepted)
        if depth == opts.max_refinement_depth:
            break
        rest = active[~ok]
        m = 0.5 * (rest[:, 0] + rest[:, 1])
        active = np.concatenate([np.stack([rest[:, 0], m], 1), np.stack([m, rest[:, 1]], 1)])
        active = active[np.argsort(active[:, 0], kind="stable")]
    raise QuadratureError("adaptive quadrature did not converge", estimate)


# ---------------------------------------------------------------------------
# Image measure

_PROBE_FRACTIONS = (0.0, 0.5, 1.0)
_MAX_SPLITS = 30


def _discretize(traj: Trajectory, pieces, step: float, min_segments: int):
    """Parameter grid: segment starts, ends and the index of the owning piece."""
    ts, piece_of = [], []
    for j, (lo, hi) in enumerate(pieces):
        n = max(min_segments, math.ceil((hi - lo) / step))
        ts.append(np.linspace(lo, hi, n + 1))
        piece_of.append(np.full(n, j))
    starts = np.concatenate([t[:-1] for t in ts])
    ends = np.concatenate([t[1:] for t in ts])
    return starts, ends, np.concatenate(piece_of)


def _positions(traj: Trajectory, t) -> np.ndarray:
    x = traj.position(t)
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("non-finite trajectory value in image measure")
    return x


def _point_segment_distance(P, A, B, open_lo=None, open_hi=None) -> np.ndarray:
    """Distance from ``P[i]`` to segment ``A[i] B[i]``.

    Where ``open_lo`` (``open_hi``) is set, a projection falling before ``A``
    (after ``B``) counts as infinitely far: the pass ends there.
    """
    AB = B - A
    denom = np.einsum("ij,ij->i", AB, AB)
    s = np.einsum("ij,ij->i", P - A, AB)
    s = np.divide(s, denom, out=np.zeros_like(s), where=denom > 0)
    d = np.linalg.norm(P - (A + np.clip(s, 0.0, 1.0)[:, None] * AB), axis=1)
    if open_lo is not None:
        d[(open_lo & (s < 0)) | (open_hi & (s > 1))] = np.inf
    return d


class _Polyline:
    """Chords of the discretised curve, searchable by passes.

    A pass is a run of consecutive segments inside one parameter interval.
    Each chord gets a slack of ``coincide_tol`` plus its own sag, so that a
    point of the true curve lying on another pass of the same arc is found
    within reach of that pass's chords.
    """

    def __init__(self, A, B, mid, piece_of, coincide_tol):
        self.A, self.B, self.piece_of = A, B, piece_of
        self.slack = coincide_tol + 1.25 * _point_segment_distance(mid, A, B)
        L = np.linalg.norm(B - A, axis=1)
        # |P - C_j| <= L_j / 2 + slack_j whenever P is within slack_j of segment j
        self.radius = 0.5 * float(L.max()) * (1 + 1e-6) + 2 * float(self.slack.max())
        self.tree = cKDTree(0.5 * (A + B))
        self.first = np.ones(len(A), dtype=bool)
        self.first[1:] = piece_of[1:] != piece_of[:-1]
        self.last = np.ones(len(A), dtype=bool)
        self.last[:-1] = self.first[1:]

    def passes(self, P, own) -> np.ndarray:
        """For each point ``P[i]`` lying on segment ``own[i]``: passes within reach."""
        n = len(self.A)
        pairs = cKDTree(P).sparse_distance_matrix(self.tree, self.radius, output_type="ndarray")
        key = np.concatenate([pairs["i"].astype(np.int64) * n + pairs["j"],
                              np.arange(len(P), dtype=np.int64) * n + own])
        key = np.unique(key)  # sorted by point, then segment
        I, J = key // n, key % n
        dist = _point_segment_distance(P[I], self.A[J], self.B[J], self.first[J], self.last[J])
        close = (J == own[I]) | (dist <= self.slack[J])
        I, J = I[close], J[close]
        new_run = np.ones(len(I), dtype=bool)
        new_run[1:] = ~((I[1:] == I[:-1]) & (J[1:] == J[:-1] + 1)
                        & (self.piece_of[J[1:]] == self.piece_of[J[:-1]]))
        return np.bincount(I, weights=new_run, minlength=len(P))

    def multiplicity(self, traj, lo, hi, own):
        """Pass counts at the probe fractions of ``[lo, hi]``: array (len(lo), 3)."""
        w = hi - lo
        t = np.concatenate([lo + f * w for f in _PROBE_FRACTIONS])
        counts = self.passes(_positions(traj, t), np.tile(own, len(_PROBE_FRACTIONS)))
        return counts.reshape(len(_PROBE_FRACTIONS), -1).T


def _drop_contacts(lo, hi, chord, count, resolution: float) -> np.ndarray:
    """Lower raised-count runs shorter than ``resolution`` to their neighbours' count.

    Pieces are sorted by parameter.  A run of pieces whose count exceeds that of
    the adjacent runs, and whose total length is below ``resolution``, is an
    isolated contact (crossing or touching endpoint) widened by the slack; a
    genuine overlap is long and keeps its count.
    """
    count = count.copy()
    brk = np.ones(len(lo) + 1, dtype=bool)
    brk[1:-1] = (count[1:] != count[:-1]) | (lo[1:] != hi[:-1])
    edges = np.nonzero(brk)[0]
    runs = list(zip(edges[:-1], edges[1:]))
    for k, (i, j) in enumerate(runs):
        c = count[i]
        if c == 1 or math.fsum(chord[i:j].tolist()) >= resolution:
            continue
        near = []
        if k > 0 and hi[runs[k - 1][1] - 1] == lo[i]:
            near.append(count[runs[k - 1][0]])
        if k + 1 < len(runs) and lo[runs[k + 1][0]] == hi[j - 1]:
            near.append(count[runs[k + 1][0]])
        if near and max(near) < c:
            count[i:j] = max(near)
    return count


def _set_length(traj: Trajectory, starts, ends, piece_of, coincide_tol: float) -> float:
    """Sum of chord lengths, each divided by the number of passes covering it.

    Segments whose probes agree on the count take it.  Segments whose probes
    disagree contain the start or end of an overlap, or an isolated contact
    such as a transversal crossing; they are bisected in parameter until the
    halves agree (at most ``_MAX_SPLITS`` times, then the smallest count is
    used).  Contacts are then removed by ``_drop_contacts``.
    """
    n = len(starts)
    X = _positions(traj, np.concatenate([starts, ends[-1:], 0.5 * (starts + ends)]))
    A, B, mid = X[:n], X[1:n + 1], X[n + 1:]
    # segments are contiguous within a piece; fix the joints between pieces
    joints = np.nonzero(piece_of[1:] != piece_of[:-1])[0]
    if len(joints):
        B = B.copy()
        B[joints] = _positions(traj, ends[joints])
    L = np.linalg.norm(B - A, axis=1)
    # zero-length segments add nothing; runs are contiguous over the kept ones
    keep = L > 0
    if not keep.any():
        return 0.0
    starts, ends, piece_of = starts[keep], ends[keep], piece_of[keep]
    A, B, mid, L = A[keep], B[keep], mid[keep], L[keep]
    poly = _Polyline(A, B, mid, piece_of, coincide_tol)

    own = np.arange(len(A))
    counts = poly.multiplicity(traj, starts, ends, own)
    settled = counts.min(axis=1) == counts.max(axis=1)
    if settled.all():
        return math.fsum((L / counts[:, 0]).tolist())
    out = [(starts[settled], ends[settled], L[settled], counts[settled, 0])]
    lo, hi, own = starts[~settled], ends[~settled], own[~settled]
    for depth in range(1, _MAX_SPLITS + 1):
        m = 0.5 * (lo + hi)
        lo, hi, own = np.concatenate([lo, m]), np.concatenate([m, hi]), np.concatenate([own, own])
        counts = poly.multiplicity(traj, lo, hi, own)
        done = (counts.min(axis=1) == counts.max(axis=1)) | (depth == _MAX_SPLITS)
        chord = np.linalg.norm(_positions(traj, hi[done]) - _positions(traj, lo[done]), axis=1)
        out.append((lo[done], hi[done], chord, counts[done].min(axis=1)))
        lo, hi, own = lo[~done], hi[~done], own[~done]
        if not len(lo):
            break
    lo, hi, chord, count = (np.concatenate(c) for c in zip(*out))
    order = np.argsort(lo, kind="stable")
    lo, hi, chord, count = lo[order], hi[order], chord[order], count[order]
    count = _drop_contacts(lo, hi, chord, count, 8 * float(poly.slack.max()))
    return math.fsum((chord / count).tolist())


def image_measure(traj: Trajectory, restrict: IntervalSet | None = None,
                  opts: MeasureOptions = DEFAULT_OPTIONS) -> Estimate:
    """Arc-length measure of the image set ``traj(restrict)``, multiplicity one.

    Each interval is cut into at least ``min_segments`` pieces of parameter
    width at most ``discretization_step``; segments from different passes that
    coincide are counted once.  The discretisation is halved until two levels
    agree to ``10 * rel_tol``; the result carries ``converged=False`` if they
    never do.
    """
    pieces = _pieces(traj, restrict)
    if not pieces:
        return Estimate(0.0, True)
    prev = None
    value = 0.0
    for level in range(opts.max_image_levels + 1):
        starts, ends, piece_of = _discretize(traj, pieces, opts.discretization_step / 2**level,
                                             opts.min_segments * 2**level)
        value = _set_length(traj, starts, ends, piece_of, opts.coincide_tol)
        if prev is not None and abs(value - prev) <= 10 * opts.rel_tol * abs(value):
            return Estimate(value, True)
        prev = value
    return Estimate(value, False)
