"""Sampled squared distance, active pairs and the generalized-gradient set.

At state ``x`` the robot samples sit at ``p(x) + e`` where ``p`` is the
position slice of ``x``. The sampled squared distance is the minimum of
``||p(x) + e - o||^2`` over body offsets ``e`` and obstacle samples ``o``.
Every pair within ``activation_tolerance`` of that minimum is active and
contributes the gradient ``2 (p(x) + e - o)`` (zero on non-position
coordinates).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .errors import DimensionMismatch, EmptySampleSet, UnsupportedShape
from .geometry import (
    Disc,
    Obstacle,
    RobotBody,
    SampledShape,
    UnionOfDiscs,
    region_distance,
    sample_boundary_grid,
)

DEFAULT_ACTIVATION_TOLERANCE = 1e-8
# pair count above which a spatial index pays for itself
INDEX_THRESHOLD = 100_000


@dataclass(frozen=True)
class ActivePair:
    e: np.ndarray
    o: np.ndarray
    squared_distance: float
    body_index: int = -1
    obstacle_index: int = -1


@dataclass(frozen=True)
class DistanceEvaluation:
    """Sampled squared distance at one state with its active pairs.

    ``gradients`` has one row per active pair (state dimension). Pair details
    are kept as index arrays; :attr:`active` materialises them on demand.
    """

    min_squared: float
    gradients: np.ndarray
    activation_tolerance: float = DEFAULT_ACTIVATION_TOLERANCE
    body_index: np.ndarray | None = None
    obstacle_index: np.ndarray | None = None
    pair_squared: np.ndarray | None = None
    body_points: np.ndarray | None = field(default=None, repr=False, compare=False)
    obstacle_points: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def distance(self):
        return float(np.sqrt(self.min_squared))

    @property
    def active_count(self) -> int:
        return int(self.gradients.shape[0])

    @cached_property
    def active(self) -> tuple:
        if self.body_index is None:
            return ()
        return tuple(
            ActivePair(self.body_points[i], self.obstacle_points[j], float(s), int(i), int(j))
            for i, j, s in zip(self.body_index, self.obstacle_index, self.pair_squared)
        )


def _nonempty(points, what):
    pts = kernels.as_points(points)
    if pts.shape[0] == 0:
        raise EmptySampleSet(f"{what} is empty")
    return pts


def sampled_min_squared(body_points, obstacle_points):
    """Exact minimum squared distance over all pairs, with its minimizing pair.

    Ties go to the lowest ``(body index, obstacle index)``.
    """
    body = _nonempty(body_points, "body sample set")
    obs = _nonempty(obstacle_points, "obstacle sample set")
    if body.shape[1] != obs.shape[1]:
        raise DimensionMismatch("body and obstacle points differ in dimension")
    sq, i, j = kernels.min_pair(body, obs, np.zeros(body.shape[1]))
    return sq, ActivePair(body[i].copy(), obs[j].copy(), sq, i, j)


class ObstacleIndex:
    """k-d tree over obstacle samples that answers active-pair queries.

    Candidates from the tree are re-scored with the same arithmetic as the
    exhaustive scan, so results match it bit for bit.
    """

    def __init__(self, obstacles: SampledShape):
        self.points = obstacles.points
        self.tree = cKDTree(self.points)

    def active_pairs(self, body_points, shift, tolerance):
        translated = body_points + shift
        _, nearest = self.tree.query(translated, k=1)
        diff = translated - self.points[nearest]
        upper = float(np.min(_sum_sq(diff)))
        radius = np.sqrt(upper + tolerance) * (1.0 + 1e-9) + 1e-12
        hits = self.tree.query_ball_point(translated, radius)
        ii = np.fromiter((i for i, row in enumerate(hits) for _ in row), dtype=np.int64)
        jj = np.fromiter((j for row in hits for j in row), dtype=np.int64)
        order = np.lexsort((jj, ii))
        ii, jj = ii[order], jj[order]
        sq = _sum_sq(translated[ii] - self.points[jj])
        best = float(sq.min())
        keep = sq <= best + tolerance
        return best, ii[keep], jj[keep], sq[keep]


def _sum_sq(diff):
    sq = diff[:, 0] * diff[:, 0]
    for d in range(1, diff.shape[1]):
        sq = sq + diff[:, d] * diff[:, d]
    return sq


def evaluate_distance(
    x,
    body: RobotBody,
    obstacles: SampledShape,
    activation_tolerance: float = DEFAULT_ACTIVATION_TOLERANCE,
    index: ObstacleIndex | None = None,
    exhaustive: bool = False,
) -> DistanceEvaluation:
    """Sampled squared distance, active pairs and their gradients at ``x``.

    Pairs are found with ``index`` when given, else by an exhaustive scan
    over the obstacle samples that survive an exact culling bound. With
    ``exhaustive=True`` the culling is skipped (every pair is scored), which
    is the reference cost model for timing studies. All three routes return
    identical results.
    """
    if activation_tolerance < 0:
        raise ValueError("activation_tolerance must be >= 0")
    x = np.asarray(x, dtype=float)
    shift = body.position(x)
    offsets = body.offset_set.points
    obs = obstacles.points
    if obs.shape[1] != offsets.shape[1]:
        raise DimensionMismatch("body offsets and obstacle samples differ in dimension")

    if index is not None:
        best, ii, jj, sq = index.active_pairs(offsets, shift, activation_tolerance)
    elif exhaustive:
        best, _, _ = kernels.min_pair(offsets, obs, shift)
        ii, jj, sq = kernels.pairs_within(offsets, obs, shift, best + activation_tolerance)
    else:
        best, ii, jj, sq = kernels.active_pairs(offsets, obs, shift, activation_tolerance, body.radius)

    grads = np.zeros((len(ii), x.shape[0]))
    grads[:, list(body.position_indices)] = 2.0 * ((offsets[ii] + shift) - obs[jj])
    return DistanceEvaluation(float(best), grads, float(activation_tolerance), ii, jj, sq, offsets, obs)


# ---------------------------------------------------------------------------
# reference distances for validation


def _body_discs(shape):
    if isinstance(shape, Disc):
        return (shape,)
    if isinstance(shape, UnionOfDiscs):
        return shape.discs
    raise UnsupportedShape(f"exact clearance needs a disc-based body, got {type(shape).__name__}")


def exact_clearance(positions, body_shape, obstacles: Sequence[Obstacle]) -> np.ndarray:
    """Exact distance between the continuous body and obstacle regions.

    ``positions`` holds body translations (one per row); ``body_shape`` is
    given in body coordinates and must be a disc or a union of discs.
    """
    p = kernels.as_points(positions)
    out = np.full(p.shape[0], np.inf)
    for disc in _body_discs(body_shape):
        centers = p + np.asarray(disc.center)
        for ob in obstacles:
            d = region_distance(centers, ob.shape, ob.enclosing) - disc.radius
            out = np.minimum(out, d)
    return np.maximum(out, 0.0)


def resampled_distance(positions, body_shape, obstacles: Sequence[Obstacle], n_body, n_obstacle, factor=20):
    """Distance between grid re-samplings of body and obstacles at ``factor``x density.

    A surrogate for the continuous distance when no exact formula applies.
    """
    body = sample_boundary_grid(body_shape, factor * n_body).points
    obs = np.vstack([sample_boundary_grid(ob.shape, factor * n_obstacle).points for ob in obstacles])
    p = kernels.as_points(positions)
    out = np.empty(p.shape[0])
    for k, shift in enumerate(p):
        sq, _, _ = kernels.min_pair(body, obs, shift)
        out[k] = np.sqrt(sq)
    return out


def true_distance(positions, body_shape, obstacles: Sequence[Obstacle], n_body=100, n_obstacle=100):
    """Exact clearance when available, else the dense re-sampling surrogate."""
    try:
        return exact_clearance(positions, body_shape, obstacles)
    except UnsupportedShape:
        return resampled_distance(positions, body_shape, obstacles, n_body, n_obstacle)


def _sampled_distance_sq(positions, offsets, obstacle_points, chunk=1 << 20):
    """Sampled squared distance at many body translations, via a k-d tree."""
    tree = cKDTree(obstacle_points)
    per = max(1, chunk // len(offsets))
    out = np.empty(positions.shape[0])
    for lo in range(0, positions.shape[0], per):
        shifts = positions[lo : lo + per]
        pts = (shifts[:, None, :] + offsets[None, :, :]).reshape(-1, offsets.shape[1])
        dist, _ = tree.query(pts, k=1)
        out[lo : lo + per] = np.min(dist.reshape(len(shifts), len(offsets)), axis=1) ** 2
    return out


def sampling_gap(positions, body: RobotBody, obstacles: SampledShape, body_shape, obstacle_specs) -> np.ndarray:
    """Sampled minus true squared distance at each body translation."""
    p = kernels.as_points(positions)
    sampled = _sampled_distance_sq(p, body.offset_set.points, obstacles.points)
    n_obs = max(len(obstacles) // max(len(obstacle_specs), 1), 3)
    true = true_distance(p, body_shape, obstacle_specs, len(body.offset_set), n_obs)
    return sampled - true * true


@dataclass(frozen=True)
class EpsilonCertificate:
    """Sampling-error certificate for one body/obstacle sampling.

    ``net_bound`` is ``2 * max(rho)`` over the body and obstacle nets.
    ``measured_gap`` is the largest sampled-minus-true squared distance seen
    over probe states whose true clearance lies in ``(0, band]``; it exceeds
    ``net_bound`` near unsampled convex corners, where the gap is first order in
    the sample spacing. ``triangle_bound`` is the rigorous
    ``(band + sqrt(rho_b) + sqrt(rho_o))^2 - band^2``. ``epsilon`` is what the
    barrier consumes: ``max(net_bound, safety_factor * measured_gap)``.
    """

    net_bound: float
    measured_gap: float
    triangle_bound: float
    epsilon: float
    band: float
    n_probes: int


def certify_epsilon(
    body: RobotBody,
    body_shape,
    obstacles: SampledShape,
    obstacle_specs: Sequence[Obstacle],
    gamma: float,
    n_probes: int = 20_000,
    seed: int = 0,
    safety_factor: float = 1.1,
    bounds=None,
) -> EpsilonCertificate:
    """Certify the sampling error over states near the safety boundary.

    The implication ``b >= 0 -> clearance >= sqrt(gamma)`` only needs the
    sampling error bounded where the true clearance is at most
    ``sqrt(gamma)``, so probes are drawn uniformly from ``bounds`` (default:
    bounding box of all samples, padded) and kept when their exact clearance
    falls in ``(0, sqrt(gamma)]``.
    """
    rho_b, rho_o = body.offset_set.rho, obstacles.rho
    if rho_b is None or rho_o is None:
        raise ValueError("certify_rho must run on body and obstacle samples first")
    net_bound = 2.0 * max(rho_b, rho_o)
    band = float(np.sqrt(gamma))
    spread = np.sqrt(rho_b) + np.sqrt(rho_o)
    triangle = (band + spread) ** 2 - band * band

    measured, kept = 0.0, 0
    if band > 0 and n_probes > 0:
        if bounds is None:
            reach = float(np.max(np.linalg.norm(body.offset_set.points, axis=1))) + band
            lo = obstacles.points.min(axis=0) - reach
            hi = obstacles.points.max(axis=0) + reach
        else:
            lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        rng = np.random.default_rng(seed)
        chunks = []
        for _ in range(200):
            cand = rng.uniform(lo, hi, size=(4 * n_probes, lo.shape[0]))
            c = exact_clearance(cand, body_shape, obstacle_specs)
            chunks.append(cand[(c > 0) & (c <= band)])
            kept = sum(len(ch) for ch in chunks)
            if kept >= n_probes:
                break
        probes = np.vstack(chunks)[:n_probes]
        kept = probes.shape[0]
        if kept:
            measured = float(np.max(sampling_gap(probes, body, obstacles, body_shape, obstacle_specs)))
    eps = max(net_bound, safety_factor * measured)
    return EpsilonCertificate(net_bound, measured, float(triangle), float(eps), band, kept)
