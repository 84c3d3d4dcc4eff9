"""Planar shapes, boundary samplers and covering-radius certificates.

Every shape exposes its boundary as a chain of line segments and circular
arcs parameterised by arc length. Samplers place points on that chain; the
covering certificate measures, with the squared Euclidean metric, how far a
boundary point can be from its nearest sample.

Units: positions in m, ``rho`` and ``epsilon`` in m^2.
"""

from __future__ import annotations

import math
from functools import cached_property
from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from . import kernels
from .errors import DimensionMismatch, EmptySampleSet, InvalidShape, UnsupportedShape

TWO_PI = 2.0 * math.pi
MEMBERSHIP_TOL = 1e-9
MAX_VALIDATION = 1_000_000


def _point(p, name="point"):
    t = tuple(float(v) for v in p)
    if len(t) != 2:
        raise InvalidShape(f"{name} must have 2 coordinates, got {len(t)}")
    if not all(math.isfinite(v) for v in t):
        raise InvalidShape(f"{name} must be finite")
    return t


@dataclass(frozen=True)
class Disc:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _point(self.center, "center"))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise InvalidShape(f"disc radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class Rectangle:
    min_corner: tuple
    max_corner: tuple

    def __post_init__(self):
        lo = _point(self.min_corner, "min_corner")
        hi = _point(self.max_corner, "max_corner")
        if not (hi[0] > lo[0] and hi[1] > lo[1]):
            raise InvalidShape("max_corner must strictly dominate min_corner")
        object.__setattr__(self, "min_corner", lo)
        object.__setattr__(self, "max_corner", hi)

    @property
    def vertices(self):
        (x0, y0), (x1, y1) = self.min_corner, self.max_corner
        return ((x0, y0), (x1, y0), (x1, y1), (x0, y1))


@dataclass(frozen=True)
class UnionOfDiscs:
    discs: tuple

    def __post_init__(self):
        discs = tuple(d if isinstance(d, Disc) else Disc(*d) for d in self.discs)
        if not discs:
            raise InvalidShape("union of discs needs at least one disc")
        object.__setattr__(self, "discs", discs)


@dataclass(frozen=True)
class Polygon:
    """Simple polygon, vertices in counter-clockwise order."""

    vertices: tuple

    def __post_init__(self):
        verts = tuple(_point(v, "vertex") for v in self.vertices)
        if len(verts) < 3:
            raise InvalidShape("polygon needs at least 3 vertices")
        object.__setattr__(self, "vertices", verts)
        if _signed_area(verts) <= 0:
            raise InvalidShape("polygon vertices must be counter-clockwise with nonzero area")
        if not _is_simple(verts):
            raise InvalidShape("polygon is self-intersecting")


Shape = Union[Disc, Rectangle, UnionOfDiscs, Polygon]


def _signed_area(verts):
    a = 0.0
    for (x0, y0), (x1, y1) in zip(verts, verts[1:] + verts[:1]):
        a += x0 * y1 - x1 * y0
    return 0.5 * a


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_intersect(p1, p2, q1, q2):
    d1, d2 = _cross(q1, q2, p1), _cross(q1, q2, p2)
    d3, d4 = _cross(p1, p2, q1), _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return (
        (d1 == 0 and on_seg(q1, q2, p1))
        or (d2 == 0 and on_seg(q1, q2, p2))
        or (d3 == 0 and on_seg(p1, p2, q1))
        or (d4 == 0 and on_seg(p1, p2, q2))
    )


def _is_simple(verts):
    n = len(verts)
    edges = [(verts[i], verts[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_intersect(*edges[i], *edges[j]):
                return False
    return True


def cover_rectangle_with_discs(center, size, angle=0.0, count=None):
    """Discs that jointly enclose a (possibly rotated) rectangle.

    The discs sit on the long axis, evenly spaced, each just large enough to
    enclose its slice of the rectangle. ``angle`` is in radians.
    """
    w, h = float(size[0]), float(size[1])
    if not (w > 0 and h > 0):
        raise InvalidShape("rectangle size must be positive")
    long_, short = (w, h) if w >= h else (h, w)
    axis = np.array([math.cos(angle), math.sin(angle)])
    if h > w:
        axis = np.array([-axis[1], axis[0]])
    k = int(count) if count is not None else max(1, math.ceil(long_ / short))
    step = long_ / k
    radius = math.hypot(short / 2.0, step / 2.0)
    c = np.asarray(center, dtype=float)
    offsets = (np.arange(k) + 0.5) * step - long_ / 2.0
    return tuple(Disc(tuple(c + t * axis), radius) for t in offsets)


# ---------------------------------------------------------------------------
# boundary chains


@dataclass(frozen=True)
class _Segment:
    start: np.ndarray
    end: np.ndarray

    @property
    def length(self):
        return float(np.hypot(*(self.end - self.start)))

    def at(self, t):
        """Points at arc length ``t`` (array) from ``start``."""
        frac = t / self.length
        return self.start[None, :] + frac[:, None] * (self.end - self.start)[None, :]


@dataclass(frozen=True)
class _Arc:
    center: np.ndarray
    radius: float
    theta0: float
    sweep: float

    @property
    def length(self):
        return self.radius * self.sweep

    def at(self, t):
        theta = self.theta0 + t / self.radius
        return self.center[None, :] + self.radius * np.column_stack((np.cos(theta), np.sin(theta)))


@dataclass(frozen=True)
class Boundary:
    pieces: tuple
    offsets: np.ndarray = field(repr=False)  # cumulative start arc length per piece

    @property
    def length(self):
        return float(self.offsets[-1])

    def points_at(self, s):
        """Boundary points at arc-length parameters ``s`` in ``[0, length)``."""
        s = np.asarray(s, dtype=float)
        idx = np.searchsorted(self.offsets, s, side="right") - 1
        idx = np.clip(idx, 0, len(self.pieces) - 1)
        out = np.empty((s.size, 2))
        for k in np.unique(idx):
            mask = idx == k
            piece = self.pieces[k]
            t = np.clip(s[mask] - self.offsets[k], 0.0, piece.length)
            out[mask] = piece.at(t)
        return out


def _chain(pieces):
    pieces = tuple(p for p in pieces if p.length > 0)
    lengths = np.array([p.length for p in pieces])
    offsets = np.concatenate(([0.0], np.cumsum(lengths)))
    return Boundary(pieces, offsets)


def _polyline_chain(verts):
    v = [np.asarray(p, dtype=float) for p in verts]
    return _chain(_Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v)))


def _merge_intervals(intervals):
    merged = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return merged


def _exposed_arcs(discs):
    """Arcs of each disc's circle not covered by the other discs.

    Returned as ``(disc_index, theta0, sweep)`` with arcs starting in
    ``[0, 2*pi)``, listed disc by disc in increasing start angle.
    """
    arcs = []
    for i, di in enumerate(discs):
        ci, ri = np.asarray(di.center), di.radius
        covered = []
        hidden = False
        for j, dj in enumerate(discs):
            if i == j:
                continue
            cj, rj = np.asarray(dj.center), dj.radius
            d = float(np.hypot(*(cj - ci)))
            if d + ri < rj or (d + ri == rj and (d > 0 or j < i)):
                hidden = True
                break
            if d >= ri + rj or d + rj <= ri:
                continue
            phi = math.atan2(cj[1] - ci[1], cj[0] - ci[0])
            cos_half = (ri * ri + d * d - rj * rj) / (2.0 * ri * d)
            half = math.acos(min(1.0, max(-1.0, cos_half)))
            a = (phi - half) % TWO_PI
            b = a + 2.0 * half
            if b > TWO_PI:
                covered += [(a, TWO_PI), (0.0, b - TWO_PI)]
            else:
                covered.append((a, b))
        if hidden:
            continue
        cursor = 0.0
        for a, b in _merge_intervals(covered):
            if a > cursor:
                arcs.append((i, cursor, a - cursor))
            cursor = max(cursor, b)
        if cursor < TWO_PI:
            arcs.append((i, cursor, TWO_PI - cursor))
    return arcs


def boundary(shape: Shape) -> Boundary:
    """Arc-length parameterised boundary chain of ``shape``."""
    if isinstance(shape, Disc):
        return _chain([_Arc(np.asarray(shape.center), shape.radius, 0.0, TWO_PI)])
    if isinstance(shape, (Rectangle, Polygon)):
        return _polyline_chain(shape.vertices)
    if isinstance(shape, UnionOfDiscs):
        return _chain(
            _Arc(np.asarray(shape.discs[i].center), shape.discs[i].radius, t0, sweep)
            for i, t0, sweep in _exposed_arcs(shape.discs)
        )
    raise UnsupportedShape(f"no boundary parameterization for {type(shape).__name__}")


# ---------------------------------------------------------------------------
# sampled shapes


SOURCES = ("grid", "uniform", "explicit")


@dataclass(frozen=True, eq=False)
class SampledShape:
    """Finite point cloud standing in for a shape, plus its covering certificate.

    ``rho`` is the squared-metric covering radius and ``epsilon = 2 * rho``;
    both stay ``None`` until :func:`certify_rho` runs.
    """

    points: np.ndarray
    rho: float | None = None
    epsilon: float | None = None
    source: str = "explicit"

    def __post_init__(self):
        pts = kernels.as_points(self.points)
        if pts.shape[0] == 0:
            raise EmptySampleSet("sampled shape has no points")
        if not np.all(np.isfinite(pts)):
            raise InvalidShape("sample points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.epsilon is not None:
            if self.rho is None or self.epsilon < 0 or self.epsilon != 2.0 * self.rho:
                raise ValueError("epsilon must equal 2 * rho and be non-negative")

    def __len__(self):
        return self.points.shape[0]

    def __eq__(self, other):
        if not isinstance(other, SampledShape):
            return NotImplemented
        return (
            self.rho == other.rho
            and self.epsilon == other.epsilon
            and self.source == other.source
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None


def _check_n(n):
    if int(n) != n or n < 3:
        raise ValueError(f"need n >= 3 samples, got {n}")
    return int(n)


def sample_boundary_grid(shape: Shape, n: int) -> SampledShape:
    """``n`` boundary points at equal arc-length spacing.

    Discs start at angle 0; polygons and rectangles at their first vertex.
    """
    n = _check_n(n)
    chain = boundary(shape)
    s = np.arange(n) * (chain.length / n)
    return SampledShape(chain.points_at(s), source="grid")


def sample_boundary_uniform(shape: Shape, n: int, seed: int) -> SampledShape:
    """``n`` i.i.d. points, uniform in arc length over the boundary."""
    n = _check_n(n)
    chain = boundary(shape)
    rng = np.random.default_rng(seed)
    s = rng.uniform(0.0, chain.length, size=n)
    return SampledShape(chain.points_at(s), source="uniform")


def _golden_max(fun, lo, hi, iters=64):
    """Vectorised golden-section search for the max of ``fun`` on each ``[lo, hi]``."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo.copy(), hi.copy()
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        left = fc > fd
        # keep [a, d] where the left probe is higher, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - inv * (b - a)
        new_d = a + inv * (b - a)
        c, d = new_c, new_d
        fc, fd = fun(c), fun(d)
    return np.maximum(fc, fd)


def default_validation_n(n_points):
    return min(100 * n_points, MAX_VALIDATION)


def certify_rho(sampled: SampledShape, shape, validation_n: int | None = None) -> SampledShape:
    """Measure the covering radius of ``sampled`` over the boundary of ``shape``.

    ``rho`` is the largest squared distance from a boundary point to its
    nearest sample, evaluated on a dense arc-length grid (including every
    corner and arc endpoint) and then refined by golden-section search
    around each near-maximal grid point. ``shape`` may also be an explicit
    ``(k, 2)`` array of validation points, used as-is.
    """
    samples = sampled.points
    if isinstance(shape, (Disc, Rectangle, UnionOfDiscs, Polygon)):
        n_val = default_validation_n(len(sampled)) if validation_n is None else int(validation_n)
        if n_val < 10 * len(sampled):
            raise ValueError("validation_n must be at least 10x the number of samples")
        chain = boundary(shape)
        s = np.unique(np.concatenate((np.arange(n_val) * (chain.length / n_val), chain.offsets[:-1])))
        s_ext = np.append(s, chain.length)  # closes the loop for window bounds
        f = kernels.nearest_sq(chain.points_at(s), samples)
        fmax = float(f.max())
        if fmax > 0:
            prev = np.roll(f, 1)
            nxt = np.roll(f, -1)
            cand = np.nonzero((f >= prev) & (f >= nxt) & (f >= 0.5 * fmax))[0]
            # windows between neighbouring validation parameters never span a piece boundary
            first = cand == 0
            left_lo = np.where(first, s[-1], s_ext[np.maximum(cand - 1, 0)])
            left_hi = np.where(first, chain.length, s[cand])
            lo = np.concatenate((left_lo, s_ext[cand]))
            hi = np.concatenate((left_hi, s_ext[cand + 1]))

            def fun(t):
                return kernels.nearest_sq(chain.points_at(np.minimum(t, np.nextafter(chain.length, 0))), samples)

            fmax = max(fmax, float(_golden_max(fun, lo, hi).max()))
        rho = fmax
    else:
        val = kernels.as_points(shape)
        if val.shape[1] != samples.shape[1]:
            raise DimensionMismatch("validation points and samples differ in dimension")
        rho = float(kernels.nearest_sq(val, samples).max())
    return replace(sampled, rho=rho, epsilon=2.0 * rho)


# ---------------------------------------------------------------------------
# membership and exact distances


def contains(shape: Shape, points) -> np.ndarray:
    """Closed-region membership for each row of ``points``."""
    p = kernels.as_points(points)
    if isinstance(shape, Disc):
        return np.hypot(p[:, 0] - shape.center[0], p[:, 1] - shape.center[1]) <= shape.radius
    if isinstance(shape, Rectangle):
        lo, hi = shape.min_corner, shape.max_corner
        return (p[:, 0] >= lo[0]) & (p[:, 0] <= hi[0]) & (p[:, 1] >= lo[1]) & (p[:, 1] <= hi[1])
    if isinstance(shape, UnionOfDiscs):
        return np.any([contains(d, p) for d in shape.discs], axis=0)
    if isinstance(shape, Polygon):
        inside = np.zeros(p.shape[0], dtype=bool)
        v = shape.vertices
        for (x0, y0), (x1, y1) in zip(v, v[1:] + v[:1]):
            crosses = (y0 > p[:, 1]) != (y1 > p[:, 1])
            with np.errstate(divide="ignore", invalid="ignore"):
                x_at = x0 + (p[:, 1] - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (p[:, 0] < x_at)
        return inside | (boundary_distance(p, shape) <= MEMBERSHIP_TOL)
    raise UnsupportedShape(type(shape).__name__)


def _segment_distance(p, a, b):
    ab = b - a
    t = np.clip(((p - a) @ ab) / float(ab @ ab), 0.0, 1.0)
    proj = a[None, :] + t[:, None] * ab[None, :]
    return np.hypot(*(p - proj).T)


def _arc_distance(p, arc: _Arc):
    rel = p - arc.center
    r = np.hypot(rel[:, 0], rel[:, 1])
    ang = (np.arctan2(rel[:, 1], rel[:, 0]) - arc.theta0) % TWO_PI
    on_arc = (ang <= arc.sweep) | (r == 0)
    radial = np.abs(r - arc.radius)
    ends = arc.at(np.array([0.0, arc.length]))
    to_ends = np.minimum(np.hypot(*(p - ends[0]).T), np.hypot(*(p - ends[1]).T))
    return np.where(on_arc, radial, to_ends)


def boundary_distance(points, shape: Shape) -> np.ndarray:
    """Exact Euclidean distance from each point to the boundary of ``shape``."""
    p = kernels.as_points(points)
    if isinstance(shape, Disc):
        return np.abs(np.hypot(p[:, 0] - shape.center[0], p[:, 1] - shape.center[1]) - shape.radius)
    chain = boundary(shape)
    out = np.full(p.shape[0], np.inf)
    for piece in chain.pieces:
        if isinstance(piece, _Segment):
            out = np.minimum(out, _segment_distance(p, piece.start, piece.end))
        else:
            out = np.minimum(out, _arc_distance(p, piece))
    return out


def region_distance(points, shape: Shape, enclosing: bool = False) -> np.ndarray:
    """Distance from each point to the obstacle region.

    With ``enclosing=True`` the obstacle is the exterior of ``shape`` (a
    workspace boundary), otherwise the shape itself.
    """
    p = kernels.as_points(points)
    inside = contains(shape, p)
    bd = boundary_distance(p, shape)
    if enclosing:
        return np.where(inside, bd, 0.0)
    return np.where(inside, 0.0, bd)


def on_shape(points, shape: Shape, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """True where a point lies in ``shape`` or within ``tol`` of it."""
    p = kernels.as_points(points)
    return contains(shape, p) | (boundary_distance(p, shape) <= tol)


# ---------------------------------------------------------------------------
# robot body


@dataclass(frozen=True)
class RobotBody:
    """Sampled body offsets, translated by the position slice of the state."""

    offset_set: SampledShape
    position_indices: tuple = (0, 1)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.position_indices)
        if len(idx) != self.offset_set.points.shape[1]:
            raise DimensionMismatch("position_indices must match the offset dimension")
        object.__setattr__(self, "position_indices", idx)

    @cached_property
    def radius(self) -> float:
        """Largest offset norm: every body sample lies within this of the reference point."""
        pts = self.offset_set.points
        return float(np.sqrt(np.max(np.sum(pts * pts, axis=1))))

    def position(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] <= max(self.position_indices):
            raise DimensionMismatch(
                f"state of dimension {x.shape} has no coordinates {self.position_indices}"
            )
        return x[list(self.position_indices)]


def robot_body_at(body: RobotBody, x: Sequence[float]) -> np.ndarray:
    """Body sample points at state ``x``."""
    return body.offset_set.points + body.position(x)


@dataclass(frozen=True)
class Obstacle:
    """A shape the robot must keep away from.

    ``enclosing=True`` marks a workspace boundary: the obstacle is everything
    outside ``shape``.
    """

    shape: Shape
    enclosing: bool = False


def merge_samples(parts: Sequence[SampledShape]) -> SampledShape:
    """Concatenate sample clouds; the covering radius of the union is the worst part's."""
    if not parts:
        raise EmptySampleSet("nothing to merge")
    pts = np.vstack([p.points for p in parts])
    rhos = [p.rho for p in parts]
    if any(r is None for r in rhos):
        return SampledShape(pts, source="explicit")
    rho = max(rhos)
    return SampledShape(pts, rho=rho, epsilon=2.0 * rho, source="explicit")
