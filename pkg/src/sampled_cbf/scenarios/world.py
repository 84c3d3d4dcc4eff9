"""Turn a :class:`ScenarioConfig` into shapes, sample sets, models and controllers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..barrier import BarrierConfig, Cubic, Linear
from ..distance import INDEX_THRESHOLD, EpsilonCertificate, ObstacleIndex, certify_epsilon
from ..dynamics import NoDisturbance, UniformBox, omni_robot, single_integrator
from ..geometry import (
    Disc,
    Obstacle,
    Polygon,
    Rectangle,
    RobotBody,
    SampledShape,
    UnionOfDiscs,
    certify_rho,
    cover_rectangle_with_discs,
    merge_samples,
    sample_boundary_grid,
    sample_boundary_uniform,
)
from ..safety_filter import InputErrorBound, Nominal, UnstructuredBound
from ..tracking import GoalPoint, PidGains, Waypoints
from .config import ScenarioConfig


def build_shape(spec: dict):
    kind = spec["type"]
    if kind == "disc":
        return Disc(tuple(spec["center"]), spec["radius"])
    if kind == "rectangle":
        return Rectangle(tuple(spec["min"]), tuple(spec["max"]))
    if kind == "polygon":
        return Polygon(tuple(tuple(v) for v in spec["vertices"]))
    if kind == "union_of_discs":
        return UnionOfDiscs(tuple(build_shape(d) for d in spec["discs"]))
    if kind == "covered_rectangle":
        return UnionOfDiscs(cover_rectangle_with_discs(spec["center"], spec["size"], spec["angle"], spec["count"]))
    raise ValueError(f"unknown shape type {kind!r}")


def _sample(shape, spec: dict, defaults: dict, salt: int) -> SampledShape:
    n = spec.get("n", defaults["n"])
    technique = spec.get("technique", defaults["technique"])
    if technique == "grid":
        sampled = sample_boundary_grid(shape, n)
    else:
        sampled = sample_boundary_uniform(shape, n, spec.get("seed", defaults["seed"] + salt))
    return certify_rho(sampled, shape)


@dataclass(frozen=True)
class SampledPart:
    label: str
    n: int
    rho: float
    net_epsilon: float


@dataclass(frozen=True)
class World:
    """Everything a run needs that does not change over time."""

    config: ScenarioConfig
    model: object
    body: RobotBody
    body_shape: object
    obstacle_specs: tuple
    obstacle_samples: SampledShape
    parts: tuple
    certificate: EpsilonCertificate
    barrier: BarrierConfig
    alpha: object
    robust: object
    disturbance: object
    gains: PidGains
    reference: object
    index: ObstacleIndex | None

    @property
    def pair_count(self):
        return len(self.body.offset_set) * len(self.obstacle_samples)


def build_model(spec):
    if spec["type"] == "omni":
        return omni_robot(spec["l"], spec["r_wheel"])
    return single_integrator(spec["n"])


def build_world(cfg: ScenarioConfig, certificate: EpsilonCertificate | None = None) -> World:
    """Sample every shape, certify the sampling error and assemble the run inputs.

    The workspace is a grid-sampled enclosing rectangle. Each obstacle uses
    its own sampler keys when present, else the scenario-wide ones; uniform
    samplers without an explicit seed get ``seed + index`` so shapes differ.
    """
    model = build_model(cfg.model)
    defaults = cfg.sampling

    body_shape = build_shape(cfg.robot["shape"])
    body_samples = _sample(body_shape, cfg.robot, defaults, salt=1000)
    body = RobotBody(body_samples)

    ws_shape = Rectangle(tuple(cfg.workspace["min"]), tuple(cfg.workspace["max"]))
    ws_n = cfg.workspace.get("n", defaults["n"])
    ws_samples = certify_rho(sample_boundary_grid(ws_shape, ws_n), ws_shape)

    specs = [Obstacle(ws_shape, enclosing=True)]
    parts = [SampledPart("robot", len(body_samples), body_samples.rho, body_samples.epsilon)]
    parts.append(SampledPart("workspace", ws_n, ws_samples.rho, ws_samples.epsilon))
    clouds = [ws_samples]
    for k, spec in enumerate(cfg.obstacles):
        shape = build_shape(spec)
        sampled = _sample(shape, spec, defaults, salt=k)
        specs.append(Obstacle(shape))
        clouds.append(sampled)
        parts.append(SampledPart(f"obstacle[{k}]", len(sampled), sampled.rho, sampled.epsilon))
    obstacle_samples = merge_samples(clouds)

    gamma = cfg.barrier["gamma"]
    if certificate is None:
        certificate = certify_epsilon(
            body,
            body_shape,
            obstacle_samples,
            specs,
            gamma,
            n_probes=cfg.barrier["epsilon_probes"],
            bounds=(cfg.workspace["min"], cfg.workspace["max"]),
        )
    eps = certificate.epsilon if cfg.barrier["epsilon"] == "certified" else cfg.barrier["epsilon"]
    barrier = BarrierConfig.from_fraction(eps, gamma, cfg.barrier["r_bar_fraction"])

    alpha = (Linear if cfg.alpha["type"] == "linear" else Cubic)(cfg.alpha["k"])
    rb = cfg.robustness
    robust = {
        "nominal": lambda: Nominal(),
        "unstructured": lambda: UnstructuredBound(rb.get("D", 0.0)),
        "input_error": lambda: InputErrorBound(rb.get("E", 0.0)),
    }[rb["type"]]()

    dist = cfg.disturbance
    if dist["type"] == "none":
        disturbance = NoDisturbance()
    else:
        hw = dist["half_width"]
        dim = cfg.input_dim if dist["space"] == "input" else cfg.state_dim
        hw = tuple(hw) if isinstance(hw, list) else (hw,) * dim
        disturbance = UniformBox(hw, dist["seed"], dist["space"])

    c = cfg.controller
    as_gain = lambda v: tuple(v) if isinstance(v, list) else v  # noqa: E731
    gains = PidGains(as_gain(c["kp"]), as_gain(c["ki"]), as_gain(c["kd"]), c["integral_clamp"])
    ref = cfg.reference
    if ref["type"] == "goal":
        reference = GoalPoint(tuple(ref["x"]))
    else:
        reference = Waypoints(tuple(map(tuple, ref["points"])), tuple(ref["times"]))

    mode = cfg.barrier["spatial_index"]
    pairs = len(body_samples) * len(obstacle_samples)
    use_index = mode == "always" or (mode == "auto" and pairs > INDEX_THRESHOLD)
    index = ObstacleIndex(obstacle_samples) if use_index else None

    return World(
        cfg, model, body, body_shape, tuple(specs), obstacle_samples, tuple(parts), certificate,
        barrier, alpha, robust, disturbance, gains, reference, index,
    )


def world_bounds(world: World):
    return np.asarray(world.config.workspace["min"]), np.asarray(world.config.workspace["max"])
