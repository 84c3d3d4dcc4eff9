"""Sampling density versus conservatism and computation time."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .simulate import run_scenario
from .world import build_world


@dataclass(frozen=True)
class TradeoffRow:
    n_samples: int
    epsilon: float
    settled_distance: float
    mean_qp_time: float
    mean_filter_time: float


@dataclass(frozen=True)
class TradeoffReport:
    rows: tuple  # sorted by epsilon, ascending


def resample_config(cfg: ScenarioConfig, n: int) -> ScenarioConfig:
    """Same scenario with every shape grid-sampled at density proportional to ``n``.

    Obstacles and the robot get ``n`` samples; the workspace keeps its sample
    ratio to the scenario-wide count so its spacing scales the same way.
    Pair search is exhaustive so filter time reflects the full pair count.
    """
    base_n = cfg.sampling["n"]
    workspace = dict(cfg.workspace)
    if "n" in workspace:
        workspace["n"] = max(3, round(workspace["n"] * n / base_n))
    strip = lambda spec: {k: v for k, v in spec.items() if k not in ("n", "technique", "seed")}  # noqa: E731
    sampling = dict(cfg.sampling, n=n, technique="grid")
    return cfg.replace(
        sampling=sampling,
        workspace=workspace,
        robot=strip(cfg.robot),
        obstacles=[strip(o) for o in cfg.obstacles],
        barrier=dict(cfg.barrier, spatial_index="exhaustive"),
        oracle=False,
    )


def run_tradeoff(base_cfg: ScenarioConfig, sample_counts, settle_fraction: float = 0.1) -> TradeoffReport:
    """Run the scenario once per sample count, serially, and tabulate the results.

    The settled distance is the smallest sampled distance over the final
    ``settle_fraction`` of the logged records; filter time is assembly
    (distance evaluation included) plus QP, averaged over every step.
    """
    rows = []
    for n in sample_counts:
        cfg = resample_config(base_cfg, int(n))
        world = build_world(cfg)
        log = run_scenario(cfg, world)
        tail = max(1, int(np.ceil(settle_fraction * len(log))))
        rows.append(
            TradeoffRow(
                int(n),
                float(world.barrier.epsilon),
                float(np.min(log.d_sampled[-tail:])),
                float(log.metadata["mean_qp_time"]),
                float(log.metadata["mean_filter_time"]),
            )
        )
    rows.sort(key=lambda r: (r.epsilon, r.n_samples))
    return TradeoffReport(tuple(rows))
