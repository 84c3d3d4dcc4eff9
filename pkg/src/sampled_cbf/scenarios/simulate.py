"""Closed-loop simulation: nominal PID, safety filter, RK4, logging."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..barrier import barrier_value
from ..distance import evaluate_distance, true_distance
from ..errors import Infeasible, OutsideDomain
from ..dynamics import sample_disturbance, step_rk4
from ..kernels import BACKEND
from ..safety_filter import build_constraints, solve_filter_qp
from ..tracking import PidMemory, pid_control
from .config import ScenarioConfig
from .world import World, build_world


@dataclass
class TrajectoryLog:
    """Per-record arrays (one row per logged step) and run metadata."""

    t: np.ndarray
    x: np.ndarray
    b: np.ndarray
    u_d: np.ndarray
    u: np.ndarray
    modified: np.ndarray
    infeasible: np.ndarray
    active_count: np.ndarray
    d_sampled: np.ndarray
    d_oracle: np.ndarray
    qp_time: np.ndarray
    assemble_time: np.ndarray
    error_norm: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.shape[0]

    @property
    def filter_time(self):
        return self.qp_time + self.assemble_time


class SimulationAborted(OutsideDomain):
    """Left the barrier domain mid-run; carries the step, state and partial log."""

    def __init__(self, b, r_bar, step, state, log):
        super().__init__(b, r_bar, f"left the domain at step {step}, state {np.array2string(state, precision=6)}: b={b:.6g} <= -r_bar={-r_bar:.6g}")
        self.step = step
        self.state = state
        self.log = log


class _Recorder:
    def __init__(self):
        self.rows = {k: [] for k in ("t", "x", "b", "u_d", "u", "modified", "infeasible", "active_count", "d_sampled", "qp_time", "assemble_time", "error_norm")}

    def add(self, **kw):
        for k, v in kw.items():
            self.rows[k].append(v)

    def finish(self, world: World, metadata: dict) -> TrajectoryLog:
        r = self.rows
        x = np.array(r["x"], dtype=float).reshape(len(r["t"]), world.model.n_x)
        n_u = world.model.n_u
        if world.config.oracle and len(r["t"]):
            d_oracle = true_distance(x[:, list(world.body.position_indices)], world.body_shape, world.obstacle_specs)
        else:
            d_oracle = np.full(len(r["t"]), np.nan)
        return TrajectoryLog(
            t=np.array(r["t"], dtype=float),
            x=x,
            b=np.array(r["b"], dtype=float),
            u_d=np.array(r["u_d"], dtype=float).reshape(-1, n_u),
            u=np.array(r["u"], dtype=float).reshape(-1, n_u),
            modified=np.array(r["modified"], dtype=bool),
            infeasible=np.array(r["infeasible"], dtype=bool),
            active_count=np.array(r["active_count"], dtype=np.int64),
            d_sampled=np.array(r["d_sampled"], dtype=float),
            d_oracle=np.asarray(d_oracle, dtype=float),
            qp_time=np.array(r["qp_time"], dtype=float),
            assemble_time=np.array(r["assemble_time"], dtype=float),
            error_norm=np.array(r["error_norm"], dtype=float),
            metadata=metadata,
        )


def run_scenario(cfg: ScenarioConfig, world: World | None = None) -> TrajectoryLog:
    """Simulate ``cfg`` from ``x0`` to ``t_end``.

    Each step: nominal PID input, distance evaluation, constraint assembly,
    QP, disturbance draw, one RK4 step. An infeasible QP applies the nominal
    input and flags the step; leaving the domain raises
    :class:`SimulationAborted`. Records are kept every ``log_every`` steps,
    including step 0 and the final step.
    """
    world = world or build_world(cfg)
    model, body, obstacles = world.model, world.body, world.obstacle_samples
    bcfg, alpha, robust = world.barrier, world.alpha, world.robust
    tol = cfg.barrier["activation_tolerance"]
    exhaustive = cfg.barrier["spatial_index"] == "exhaustive"
    dt, n_steps, every = cfg.dt, cfg.n_steps, cfg.log_every
    input_noise = getattr(world.disturbance, "space", "state") == "input"
    zero_d = np.zeros(model.n_x)

    x = np.asarray(cfg.x0, dtype=float)
    memory = PidMemory()
    rec = _Recorder()
    stats = {"infeasible_steps": 0, "modified_steps": 0, "min_b": np.inf, "qp_total": 0.0, "filter_total": 0.0}
    continuity = 0.0
    prev_u = prev_x = None

    for k in range(n_steps + 1):
        t = k * dt
        x_d = world.reference(t)
        u_d, memory = pid_control(world.gains, x, x_d, dt, memory, model)

        start = time.perf_counter()
        ev = evaluate_distance(x, body, obstacles, tol, world.index, exhaustive)
        b = barrier_value(ev, bcfg)
        try:
            cons = build_constraints(x, t, ev, b, model, alpha, robust, bcfg.r_bar)
        except OutsideDomain:
            log = rec.finish(world, _metadata(world, stats, continuity, k))
            raise SimulationAborted(b, bcfg.r_bar, k, x.copy(), log) from None
        assemble = time.perf_counter() - start
        infeasible = False
        try:
            res = solve_filter_qp(u_d, cons)
            u, modified, qp_time = res.u_star, res.modified, res.solve_time
        except Infeasible:
            u, modified, infeasible = u_d, False, True
            qp_time = time.perf_counter() - start - assemble
            stats["infeasible_steps"] += 1

        stats["min_b"] = min(stats["min_b"], b)
        stats["modified_steps"] += modified
        stats["qp_total"] += qp_time
        stats["filter_total"] += qp_time + assemble
        if prev_u is not None:
            dx = float(np.linalg.norm(x - prev_x))
            if dx > 0:
                continuity = max(continuity, float(np.linalg.norm(u - prev_u)) / dx)
        prev_u, prev_x = u, x

        if k % every == 0:
            rec.add(
                t=t, x=x.copy(), b=b, u_d=u_d, u=u, modified=modified, infeasible=infeasible,
                active_count=ev.active_count, d_sampled=ev.distance, qp_time=qp_time,
                assemble_time=assemble, error_norm=float(np.linalg.norm(x_d - x)),
            )
        if k == n_steps:
            break

        if input_noise:
            u_applied, d = u + world.disturbance.draw(k), zero_d
        else:
            u_applied, d = u, sample_disturbance(world.disturbance, x, t, k, model)
        x = step_rk4(model, x, u_applied, d, dt)

    return rec.finish(world, _metadata(world, stats, continuity, n_steps + 1))


def _metadata(world: World, stats: dict, continuity: float, steps_done: int) -> dict:
    cert = world.certificate
    steps = max(steps_done, 1)
    return {
        "scenario": world.config.name,
        "config_hash": world.config.digest(),
        "backend": BACKEND,
        "epsilon": world.barrier.epsilon,
        "epsilon_net_bound": cert.net_bound,
        "epsilon_measured_gap": cert.measured_gap,
        "epsilon_triangle_bound": cert.triangle_bound,
        "epsilon_probes": cert.n_probes,
        "gamma": world.barrier.gamma,
        "r_bar": world.barrier.r_bar,
        "samples": {p.label: p.n for p in world.parts},
        "rho": {p.label: p.rho for p in world.parts},
        "steps": steps_done,
        "infeasible_steps": stats["infeasible_steps"],
        "modified_steps": int(stats["modified_steps"]),
        "min_b_all_steps": float(stats["min_b"]),
        "mean_qp_time": stats["qp_total"] / steps,
        "mean_filter_time": stats["filter_total"] / steps,
        "max_input_continuity_ratio": continuity,
        "spatial_index": world.index is not None,
    }
