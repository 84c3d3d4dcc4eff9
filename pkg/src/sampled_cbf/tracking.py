"""Nominal tracking control and a decay diagnostic for the unfiltered loop.

The PID acts in task space: it produces a desired state velocity ``v`` from
the tracking error and maps it to inputs with the right pseudoinverse of
``g(x)``. The diagnostic fits an exponential envelope to the error norm on a
stretch of the run where the filter never intervened. It is a monitor only;
a fitted rate says nothing about a class-KL bound holding in general.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .dynamics import ControlAffineModel
from .errors import NoCleanSegment


def _per_axis(value, name):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be a finite scalar or vector")
    return arr


@dataclass(frozen=True)
class PidGains:
    """Per-axis gains (scalars broadcast over state coordinates)."""

    kp: float | tuple = 0.5
    ki: float | tuple = 0.01
    kd: float | tuple = 0.1
    integral_clamp: float = 10.0

    def __post_init__(self):
        if not np.all(_per_axis(self.kp, "kp") > 0):
            raise ValueError("kp must be positive")
        if np.any(_per_axis(self.ki, "ki") < 0) or np.any(_per_axis(self.kd, "kd") < 0):
            raise ValueError("ki and kd must be non-negative")
        if not self.integral_clamp > 0:
            raise ValueError("integral_clamp must be positive")

    @cached_property
    def arrays(self):
        """``(kp, ki, kd)`` as float arrays, for per-step use."""
        return _per_axis(self.kp, "kp"), _per_axis(self.ki, "ki"), _per_axis(self.kd, "kd")


@dataclass
class PidMemory:
    integral: np.ndarray | None = None
    previous_error: np.ndarray | None = None


def pseudo_inverse_apply(gx: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``g^T (g g^T)^-1 v``; a plain solve when ``g`` is square."""
    if gx.shape[0] == gx.shape[1]:
        return np.linalg.solve(gx, v)
    return gx.T @ np.linalg.solve(gx @ gx.T, v)


def pid_control(gains: PidGains, x, x_d, dt: float, memory: PidMemory | None = None, model: ControlAffineModel | None = None):
    """One PID update; returns ``(u_d, memory')``.

    ``model`` supplies ``g(x)``; without one ``g`` is taken as the identity.
    The incoming memory is not mutated.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    e = np.asarray(x_d, dtype=float) - x
    memory = memory or PidMemory()
    integral = np.zeros_like(e) if memory.integral is None else memory.integral
    integral = np.clip(integral + e * dt, -gains.integral_clamp, gains.integral_clamp)
    de = np.zeros_like(e) if memory.previous_error is None else (e - memory.previous_error) / dt
    kp, ki, kd = gains.arrays
    v = kp * e + ki * integral + kd * de
    u = v if model is None else pseudo_inverse_apply(model.g(x), v)
    return u, PidMemory(integral, e)


# references -----------------------------------------------------------------


@dataclass(frozen=True)
class GoalPoint:
    x_goal: tuple

    def __call__(self, t):
        return np.asarray(self.x_goal, dtype=float)


@dataclass(frozen=True)
class Waypoints:
    """Piecewise-linear in time through ``points`` at ``times``; held outside the range."""

    points: tuple
    times: tuple

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        ts = np.asarray(self.times, dtype=float)
        if pts.ndim != 2 or len(pts) != len(ts) or len(ts) == 0:
            raise ValueError("need one time per waypoint")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("waypoint times must be strictly increasing")

    def __call__(self, t):
        pts = np.asarray(self.points, dtype=float)
        ts = np.asarray(self.times, dtype=float)
        return np.array([np.interp(t, ts, pts[:, k]) for k in range(pts.shape[1])])


@dataclass(frozen=True)
class Analytic:
    fn: Callable[[float], np.ndarray] = field(compare=False)

    def __call__(self, t):
        return np.asarray(self.fn(t), dtype=float)


ReferenceTrajectory = GoalPoint | Waypoints | Analytic


# diagnostic ------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """``||e(t)|| <= c exp(-lam (t - t_start)) ||e(t_start)||`` on the fitted segment."""

    c: float
    lam: float
    t_start: float
    t_end: float
    n_points: int

    @property
    def decaying(self):
        return self.lam > 0


def _longest_clean_run(mask):
    best, start = (0, 0), None
    for k, ok in enumerate(mask):
        if ok:
            if start is None:
                start = k
            if k + 1 - start > best[1] - best[0]:
                best = (start, k + 1)
        else:
            start = None
    return best


def tracking_diagnostic(log) -> DecayFit:
    """Fit an exponential envelope to the tracking error on the longest unfiltered stretch.

    ``log`` needs array attributes ``t``, ``error_norm`` and ``modified``.
    """
    t = np.asarray(getattr(log, "t", []), dtype=float)
    err = np.asarray(getattr(log, "error_norm", []), dtype=float)
    modified = np.asarray(getattr(log, "modified", []), dtype=bool)
    if t.size == 0:
        raise NoCleanSegment("log is empty")
    lo, hi = _longest_clean_run(~modified & (err > 0) & np.isfinite(err))
    if hi - lo < 3:
        raise NoCleanSegment("no stretch of at least 3 unfiltered records with nonzero error")
    ts, es = t[lo:hi], err[lo:hi]
    slope, _ = np.polyfit(ts - ts[0], np.log(es), 1)
    lam = float(-slope)
    # rounding in log() leaves a residual slope on a flat log; call it flat
    if abs(lam) * max(ts[-1] - ts[0], 1e-300) <= 1e-9:
        lam = 0.0
    c = float(np.max(es * np.exp(lam * (ts - ts[0])) / es[0]))
    return DecayFit(c, lam, float(ts[0]), float(ts[-1]), int(hi - lo))
