"""Barrier constraints and the minimally invasive safety QP.

Each active gradient ``zeta`` yields one linear constraint in the input,

    (zeta^T g(x)) u + zeta^T f(x) - margin(zeta) + alpha(b) >= 0,

and the filtered input is the Euclidean projection of the nominal input onto
their intersection. The projection is computed by a dual active-set method
(Goldfarb-Idnani with identity Hessian): start from the unconstrained
optimum ``u_d`` and add violated constraints one at a time, dropping any
whose multiplier would turn negative.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .barrier import BarrierConfig, Linear, barrier_value
from .distance import DEFAULT_ACTIVATION_TOLERANCE, DistanceEvaluation, ObstacleIndex, evaluate_distance
from .dynamics import ControlAffineModel
from .errors import Infeasible, NumericalFailure, OutsideDomain
from .geometry import RobotBody, SampledShape

FEASIBILITY_TOL = 1e-8
MODIFIED_TOL = 1e-12


@dataclass(frozen=True)
class SafetyConstraint:
    """Feasible iff ``a @ u + c >= 0``."""

    a: np.ndarray
    c: float
    robust_margin: float = 0.0

    def residual(self, u) -> float:
        return float(self.a @ u + self.c)


# robustness variants ---------------------------------------------------------


def _bound_at(bound, x, t):
    value = float(bound(x, t)) if callable(bound) else float(bound)
    if value < 0:
        raise ValueError(f"disturbance bound must be non-negative, got {value}")
    return value


@dataclass(frozen=True)
class Nominal:
    pass


@dataclass(frozen=True)
class UnstructuredBound:
    """Additive state disturbance with ``||d(x, t)|| <= D(x, t)``; ``D`` is a constant or callable."""

    D: float | Callable = 0.0


@dataclass(frozen=True)
class InputErrorBound:
    """Disturbance ``g(x) e`` with input error ``||e(x, t)|| <= E(x, t)``."""

    E: float | Callable = 0.0


RobustnessSpec = Nominal | UnstructuredBound | InputErrorBound


def build_constraints(
    x,
    t: float,
    evaluation: DistanceEvaluation,
    b: float,
    model: ControlAffineModel,
    alpha=Linear(1.0),
    robust: RobustnessSpec = Nominal(),
    r_bar: float | None = None,
) -> list[SafetyConstraint]:
    """One constraint per active gradient; their conjunction is the inf over the gradient set."""
    if r_bar is not None and not b > -r_bar:
        raise OutsideDomain(b, r_bar)
    zetas = evaluation.gradients
    if zetas.shape[0] == 0:
        raise ValueError("distance evaluation has no active gradients")
    x = np.asarray(x, dtype=float)
    gx = model.g(x)
    rows = zetas @ gx
    drift = zetas @ model.f(x)
    if isinstance(robust, Nominal):
        margins = np.zeros(len(rows))
    elif isinstance(robust, UnstructuredBound):
        margins = np.linalg.norm(zetas, axis=1) * _bound_at(robust.D, x, t)
    elif isinstance(robust, InputErrorBound):
        margins = np.linalg.norm(rows, axis=1) * _bound_at(robust.E, x, t)
    else:
        raise TypeError(f"unknown robustness spec {robust!r}")
    offset = alpha(b)
    return [
        SafetyConstraint(rows[i], float(drift[i] - margins[i] + offset), float(margins[i]))
        for i in range(len(rows))
    ]


# QP ------------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterResult:
    u_star: np.ndarray
    active_constraints: tuple
    modified: bool
    solve_time: float
    multipliers: np.ndarray
    iterations: int = 0


def _project(u_d, A, c, max_iter):
    """Dual active-set projection of ``u_d`` onto ``{u : A u + c >= 0}``.

    Returns ``(u, active, multipliers, iterations)``.
    """
    m, _ = A.shape
    row_norm = np.linalg.norm(A, axis=1)
    u = u_d.copy()
    active: list[int] = []
    lam: list[float] = []
    scale = 1.0 + float(np.max(np.abs(c))) + float(np.max(row_norm)) * float(np.linalg.norm(u_d))
    tol = 1e-13 * scale

    for it in range(1, max_iter + 1):
        s = A @ u + c
        s[active] = np.inf
        p = int(np.argmin(s))
        if s[p] >= -tol:
            out = np.zeros(m)
            out[active] = lam
            return u, tuple(active), out, it
        if row_norm[p] == 0:
            raise Infeasible(f"constraint {p} has zero normal and is violated by {-s[p]:.3g}")
        n_p = A[p]
        lam_p = 0.0
        while True:
            if active:
                N = A[active].T
                try:
                    L = np.linalg.cholesky(N.T @ N)
                except np.linalg.LinAlgError as exc:
                    raise NumericalFailure("active constraint normals are degenerate") from exc
                r = np.linalg.solve(L.T, np.linalg.solve(L, N.T @ n_p))
                z = n_p - N @ r
            else:
                r = np.empty(0)
                z = n_p
            zz = float(z @ n_p)
            full = np.inf if zz <= 1e-12 * row_norm[p] ** 2 else -(float(n_p @ u) + c[p]) / zz
            partial, drop = np.inf, -1
            for j, rj in enumerate(r):
                if rj > 0:
                    ratio = lam[j] / rj
                    if ratio < partial:
                        partial, drop = ratio, j
            step = min(full, partial)
            if step == np.inf:
                raise Infeasible("safety constraints have an empty intersection")
            if full < np.inf:
                u = u + step * z
            lam = [lj - step * rj for lj, rj in zip(lam, r)]
            lam_p += step
            if step == full:
                active.append(p)
                lam.append(lam_p)
                break
            del active[drop]
            del lam[drop]
    raise NumericalFailure(f"dual active-set did not converge in {max_iter} iterations")


def solve_filter_qp(u_d, constraints: Sequence[SafetyConstraint], max_iter: int | None = None) -> FilterResult:
    """Minimize ``||u - u_d||^2`` subject to every constraint.

    ``u_d`` is returned unchanged (same values, ``modified=False``) when it is
    already feasible. Raises :class:`Infeasible` for an empty feasible set.
    """
    start = time.perf_counter()
    u_d = np.asarray(u_d, dtype=float)
    if not constraints:
        return FilterResult(u_d.copy(), (), False, time.perf_counter() - start, np.zeros(0))
    A = np.array([con.a for con in constraints], dtype=float)
    c = np.array([con.c for con in constraints], dtype=float)
    if A.shape[1] != u_d.shape[0]:
        raise ValueError("constraint rows and u_d differ in dimension")
    if np.all(A @ u_d + c >= 0.0):
        return FilterResult(u_d.copy(), (), False, time.perf_counter() - start, np.zeros(len(c)))

    if len(c) == 1:
        a = A[0]
        aa = float(a @ a)
        if aa == 0.0:
            raise Infeasible("single constraint with zero normal is violated")
        lam = -(float(a @ u_d) + c[0]) / aa
        u, active, mult, iters = u_d + lam * a, (0,), np.array([lam]), 1
    else:
        iters_cap = max_iter or 10 * (len(c) + u_d.shape[0]) + 20
        u, active, mult, iters = _project(u_d, A, c, iters_cap)

    worst = float(np.min(A @ u + c))
    if worst < -FEASIBILITY_TOL * (1.0 + float(np.max(np.abs(c)))):
        raise NumericalFailure(f"QP solution violates a constraint by {-worst:.3g}")
    modified = bool(np.max(np.abs(u - u_d)) > MODIFIED_TOL)
    return FilterResult(u, active, modified, time.perf_counter() - start, mult, iters)


# pipeline ------------------------------------------------------------------------


@dataclass(frozen=True)
class FilterStep:
    """Everything one call of :func:`filter_input` computed."""

    result: FilterResult
    u_d: np.ndarray
    b: float
    evaluation: DistanceEvaluation
    constraints: tuple
    assemble_time: float

    @property
    def qp_time(self):
        return self.result.solve_time

    @property
    def u_star(self):
        return self.result.u_star


def filter_input(
    x,
    t: float,
    body: RobotBody,
    obstacles: SampledShape,
    cfg: BarrierConfig,
    model: ControlAffineModel,
    alpha=Linear(1.0),
    robust: RobustnessSpec = Nominal(),
    u_d_fn=None,
    activation_tolerance: float = DEFAULT_ACTIVATION_TOLERANCE,
    index: ObstacleIndex | None = None,
) -> FilterStep:
    """Distance evaluation, barrier, constraint assembly and QP for one state.

    ``u_d_fn`` is either a callable ``(x, t) -> u_d`` or the nominal input
    itself. ``assemble_time`` covers everything before the QP (distance
    evaluation included); the QP time is ``result.solve_time``.
    """
    x = np.asarray(x, dtype=float)
    u_d = np.asarray(u_d_fn(x, t) if callable(u_d_fn) else u_d_fn, dtype=float)
    start = time.perf_counter()
    evaluation = evaluate_distance(x, body, obstacles, activation_tolerance, index)
    b = barrier_value(evaluation, cfg)
    constraints = tuple(build_constraints(x, t, evaluation, b, model, alpha, robust, cfg.r_bar))
    assemble = time.perf_counter() - start
    result = solve_filter_qp(u_d, constraints)
    return FilterStep(result, u_d, b, evaluation, constraints, assemble)
