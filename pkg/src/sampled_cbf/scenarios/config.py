"""Scenario files: JSON parsing, validation and default filling.

A scenario is kept as plain JSON-compatible data so that
``from_dict(to_dict(cfg)) == cfg`` holds field by field. The builders in
:mod:`sampled_cbf.scenarios.world` turn it into shapes, samples and models.

Schema (keys marked * are required)::

    name            str
    description     str
    model           {"type": "omni", "l": 0.2, "r_wheel": 0.02}
                    | {"type": "single_integrator", "n": 2}
    workspace*      {"min": [x, y], "max": [x, y], "n": <grid samples>}
    obstacles       [shape, ...]   each shape may carry "n" and "technique"
    robot           {"shape": shape, "n": <samples>}
    sampling        {"technique": "grid" | "uniform", "n": 100, "seed": 0}
    barrier         {"gamma": 0.05, "r_bar_fraction": 0.5, "epsilon": "certified" | float,
                     "activation_tolerance": 1e-8, "epsilon_probes": 20000,
                     "spatial_index": "auto" | "always" | "never" | "exhaustive"}
    alpha           {"type": "linear" | "cubic", "k": 1.0}
    robustness      {"type": "nominal"} | {"type": "unstructured", "D": float}
                    | {"type": "input_error", "E": float}
    disturbance     {"type": "none"}
                    | {"type": "uniform_box", "half_width": float | [..], "space": "state" | "input", "seed": 0}
    controller      {"kp": 0.5, "ki": 0.01, "kd": 0.1, "integral_clamp": 10.0}
    reference*      {"type": "goal", "x": [..]} | {"type": "waypoints", "points": [[..]], "times": [..]}
    x0*             [..]
    dt, t_end*, log_every, oracle

Shapes: {"type": "disc", "center", "radius"}, {"type": "rectangle", "min", "max"},
{"type": "polygon", "vertices"}, {"type": "union_of_discs", "discs": [disc, ...]},
{"type": "covered_rectangle", "center", "size", "angle", "count"}.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, fields

from ..errors import ParseError, ValidationError

DEFAULTS = {
    "name": "scenario",
    "description": "",
    "model": {"type": "omni", "l": 0.2, "r_wheel": 0.02},
    "obstacles": [],
    "robot": {"shape": {"type": "disc", "center": [0.0, 0.0], "radius": 0.2}},
    "sampling": {"technique": "grid", "n": 100, "seed": 0},
    "barrier": {
        "gamma": 0.05,
        "r_bar_fraction": 0.5,
        "epsilon": "certified",
        "activation_tolerance": 1e-8,
        "epsilon_probes": 20000,
        "spatial_index": "auto",
    },
    "alpha": {"type": "linear", "k": 1.0},
    "robustness": {"type": "nominal"},
    "disturbance": {"type": "none"},
    "controller": {"kp": 0.5, "ki": 0.01, "kd": 0.1, "integral_clamp": 10.0},
    "dt": 0.01,
    "log_every": 1,
    "oracle": True,
}

SHAPE_KEYS = {
    "disc": ({"center", "radius"}, set()),
    "rectangle": ({"min", "max"}, set()),
    "polygon": ({"vertices"}, set()),
    "union_of_discs": ({"discs"}, set()),
    "covered_rectangle": ({"center", "size"}, {"angle", "count"}),
}
SAMPLER_KEYS = {"n", "technique", "seed"}
# pair search: k-d tree above a size threshold, always, culled scan only, or full scan
SEARCH_MODES = ("auto", "always", "never", "exhaustive")


@dataclass(eq=True)
class ScenarioConfig:
    name: str
    description: str
    model: dict
    workspace: dict
    obstacles: list
    robot: dict
    sampling: dict
    barrier: dict
    alpha: dict
    robustness: dict
    disturbance: dict
    controller: dict
    reference: dict
    x0: list
    dt: float
    t_end: float
    log_every: int
    oracle: bool

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_end / self.dt + 1e-9))

    @property
    def n_records(self) -> int:
        return self.n_steps // self.log_every + 1

    @property
    def state_dim(self) -> int:
        return _model_dims(self.model)[0]

    @property
    def input_dim(self) -> int:
        return _model_dims(self.model)[1]

    def replace(self, **changes) -> "ScenarioConfig":
        data = self.to_dict()
        data.update(copy.deepcopy(changes))
        return from_dict(data)


# ---------------------------------------------------------------------------
# validation helpers


def _fail(field, message):
    raise ValidationError(message, field=field)


def _number(value, field, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        _fail(field, f"{field} must be a finite number")
    value = float(value)
    if positive and not value > 0:
        _fail(field, f"{field} must be > 0")
    if nonneg and value < 0:
        _fail(field, f"{field} must be >= 0")
    return value


def _vector(value, field, dim=None):
    if not isinstance(value, (list, tuple)) or not value:
        _fail(field, f"{field} must be a non-empty list of numbers")
    out = [_number(v, f"{field}[{k}]") for k, v in enumerate(value)]
    if dim is not None and len(out) != dim:
        _fail(field, f"{field} must have length {dim}")
    return out


def _mapping(value, field):
    if not isinstance(value, dict):
        _fail(field, f"{field} must be an object")
    return value


def _keys(obj, field, required, optional):
    missing = required - obj.keys()
    if missing:
        _fail(field, f"{field} is missing {sorted(missing)}")
    extra = obj.keys() - required - optional
    if extra:
        _fail(field, f"{field} has unknown keys {sorted(extra)}")


def _sampler_fields(obj, field, out):
    if "n" in obj:
        n = obj["n"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 3:
            _fail(f"{field}.n", "sample count n must be an integer >= 3")
        out["n"] = n
    if "technique" in obj:
        if obj["technique"] not in ("grid", "uniform"):
            _fail(f"{field}.technique", "technique must be 'grid' or 'uniform'")
        out["technique"] = obj["technique"]
    if "seed" in obj:
        if isinstance(obj["seed"], bool) or not isinstance(obj["seed"], int):
            _fail(f"{field}.seed", "seed must be an integer")
        out["seed"] = obj["seed"]
    return out


def _shape(obj, field, allow_sampler=True):
    obj = _mapping(obj, field)
    kind = obj.get("type")
    if kind not in SHAPE_KEYS:
        _fail(f"{field}.type", f"unknown shape type {kind!r}")
    required, optional = SHAPE_KEYS[kind]
    _keys(obj, field, required | {"type"}, optional | (SAMPLER_KEYS if allow_sampler else set()))
    out = {"type": kind}
    if kind == "disc":
        out["center"] = _vector(obj["center"], f"{field}.center", 2)
        out["radius"] = _number(obj["radius"], f"{field}.radius", positive=True)
    elif kind == "rectangle":
        out["min"] = _vector(obj["min"], f"{field}.min", 2)
        out["max"] = _vector(obj["max"], f"{field}.max", 2)
        if not all(a < b for a, b in zip(out["min"], out["max"])):
            _fail(field, f"{field}: min must be below max in every coordinate")
    elif kind == "polygon":
        verts = obj["vertices"]
        if not isinstance(verts, list) or len(verts) < 3:
            _fail(f"{field}.vertices", "polygon needs at least 3 vertices")
        out["vertices"] = [_vector(v, f"{field}.vertices[{k}]", 2) for k, v in enumerate(verts)]
    elif kind == "union_of_discs":
        discs = obj["discs"]
        if not isinstance(discs, list) or not discs:
            _fail(f"{field}.discs", "union needs at least one disc")
        out["discs"] = []
        for k, d in enumerate(discs):
            d = _shape(d, f"{field}.discs[{k}]", allow_sampler=False)
            if d["type"] != "disc":
                _fail(f"{field}.discs[{k}]", "union members must be discs")
            out["discs"].append(d)
    else:
        out["center"] = _vector(obj["center"], f"{field}.center", 2)
        out["size"] = _vector(obj["size"], f"{field}.size", 2)
        if min(out["size"]) <= 0:
            _fail(f"{field}.size", "rectangle size must be positive")
        out["angle"] = _number(obj.get("angle", 0.0), f"{field}.angle")
        count = obj.get("count")
        if count is not None and (isinstance(count, bool) or not isinstance(count, int) or count < 1):
            _fail(f"{field}.count", "count must be a positive integer")
        out["count"] = count
    if allow_sampler:
        _sampler_fields(obj, field, out)
    return out


def _model_dims(model):
    if model["type"] == "omni":
        return 3, 3
    return model["n"], model["n"]


def _model(obj):
    obj = _mapping(obj, "model")
    kind = obj.get("type")
    if kind == "omni":
        _keys(obj, "model", {"type"}, {"l", "r_wheel"})
        return {
            "type": "omni",
            "l": _number(obj.get("l", 0.2), "model.l", positive=True),
            "r_wheel": _number(obj.get("r_wheel", 0.02), "model.r_wheel", positive=True),
        }
    if kind == "single_integrator":
        _keys(obj, "model", {"type", "n"}, set())
        n = obj["n"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 2:
            _fail("model.n", "single integrator needs an integer dimension >= 2")
        return {"type": "single_integrator", "n": n}
    _fail("model.type", f"unknown model type {kind!r}")


def _with_defaults(obj, key):
    merged = copy.deepcopy(DEFAULTS[key])
    merged.update(_mapping(obj, key))
    return merged


def _choice(obj, field, options):
    if obj.get("type") not in options:
        _fail(f"{field}.type", f"{field}.type must be one of {sorted(options)}")
    return obj["type"]


def from_dict(data) -> ScenarioConfig:
    """Validate ``data`` and fill defaults."""
    data = _mapping(data, "scenario")
    known = {f.name for f in fields(ScenarioConfig)}
    extra = data.keys() - known
    if extra:
        _fail(sorted(extra)[0], f"unknown top-level keys {sorted(extra)}")
    if "workspace" not in data:
        _fail("workspace", "workspace required for compact safe set")
    for key in ("reference", "x0", "t_end"):
        if key not in data:
            _fail(key, f"{key} is required")

    name = data.get("name", DEFAULTS["name"])
    description = data.get("description", DEFAULTS["description"])
    if not isinstance(name, str) or not isinstance(description, str):
        _fail("name", "name and description must be strings")
    model = _model(data.get("model", DEFAULTS["model"]))
    n_x, _ = _model_dims(model)

    ws = _mapping(data["workspace"], "workspace")
    _keys(ws, "workspace", {"min", "max"}, {"n"})
    workspace = {"min": _vector(ws["min"], "workspace.min", 2), "max": _vector(ws["max"], "workspace.max", 2)}
    if not all(a < b for a, b in zip(workspace["min"], workspace["max"])):
        _fail("workspace", "workspace min must be below max in every coordinate")
    _sampler_fields({k: v for k, v in ws.items() if k == "n"}, "workspace", workspace)

    obstacles = data.get("obstacles", [])
    if not isinstance(obstacles, list):
        _fail("obstacles", "obstacles must be a list")
    obstacles = [_shape(o, f"obstacles[{k}]") for k, o in enumerate(obstacles)]

    robot_in = _mapping(data.get("robot", DEFAULTS["robot"]), "robot")
    _keys(robot_in, "robot", {"shape"}, SAMPLER_KEYS)
    robot = _sampler_fields(robot_in, "robot", {"shape": _shape(robot_in["shape"], "robot.shape", allow_sampler=False)})

    sampling_in = _with_defaults(data.get("sampling", {}), "sampling")
    _keys(sampling_in, "sampling", set(), SAMPLER_KEYS)
    sampling = _sampler_fields(sampling_in, "sampling", {})

    barrier = _with_defaults(data.get("barrier", {}), "barrier")
    _keys(barrier, "barrier", set(), set(DEFAULTS["barrier"]))
    barrier["gamma"] = _number(barrier["gamma"], "barrier.gamma", nonneg=True)
    frac = _number(barrier["r_bar_fraction"], "barrier.r_bar_fraction")
    if not 0 < frac < 1:
        _fail("barrier.r_bar_fraction", "r_bar_fraction must lie in (0, 1)")
    barrier["r_bar_fraction"] = frac
    if barrier["epsilon"] != "certified":
        barrier["epsilon"] = _number(barrier["epsilon"], "barrier.epsilon", nonneg=True)
    barrier["activation_tolerance"] = _number(barrier["activation_tolerance"], "barrier.activation_tolerance", nonneg=True)
    probes = barrier["epsilon_probes"]
    if isinstance(probes, bool) or not isinstance(probes, int) or probes < 0:
        _fail("barrier.epsilon_probes", "epsilon_probes must be a non-negative integer")
    if barrier["spatial_index"] not in SEARCH_MODES:
        _fail("barrier.spatial_index", f"spatial_index must be one of {list(SEARCH_MODES)}")

    alpha = _with_defaults(data.get("alpha", {}), "alpha")
    _keys(alpha, "alpha", {"type", "k"}, set())
    _choice(alpha, "alpha", {"linear", "cubic"})
    alpha["k"] = _number(alpha["k"], "alpha.k", positive=True)

    robustness = copy.deepcopy(_mapping(data.get("robustness", DEFAULTS["robustness"]), "robustness"))
    kind = _choice(robustness, "robustness", {"nominal", "unstructured", "input_error"})
    bound_key = {"nominal": None, "unstructured": "D", "input_error": "E"}[kind]
    _keys(robustness, "robustness", {"type"} | ({bound_key} if bound_key else set()), set())
    if bound_key:
        robustness[bound_key] = _number(robustness[bound_key], f"robustness.{bound_key}", nonneg=True)

    disturbance = copy.deepcopy(_mapping(data.get("disturbance", DEFAULTS["disturbance"]), "disturbance"))
    kind = _choice(disturbance, "disturbance", {"none", "uniform_box"})
    if kind == "none":
        _keys(disturbance, "disturbance", {"type"}, set())
    else:
        _keys(disturbance, "disturbance", {"type", "half_width"}, {"space", "seed"})
        hw = disturbance["half_width"]
        disturbance["half_width"] = (
            _vector(hw, "disturbance.half_width") if isinstance(hw, list) else _number(hw, "disturbance.half_width", nonneg=True)
        )
        if isinstance(disturbance["half_width"], list) and min(disturbance["half_width"]) < 0:
            _fail("disturbance.half_width", "half widths must be >= 0")
        disturbance.setdefault("space", "state")
        if disturbance["space"] not in ("state", "input"):
            _fail("disturbance.space", "space must be 'state' or 'input'")
        disturbance.setdefault("seed", 0)
        _sampler_fields({"seed": disturbance["seed"]}, "disturbance", {})

    controller = _with_defaults(data.get("controller", {}), "controller")
    _keys(controller, "controller", set(), set(DEFAULTS["controller"]))
    for key in ("kp", "ki", "kd"):
        v = controller[key]
        controller[key] = _vector(v, f"controller.{key}", n_x) if isinstance(v, list) else _number(v, f"controller.{key}")
    kp = controller["kp"] if isinstance(controller["kp"], list) else [controller["kp"]]
    if min(kp) <= 0:
        _fail("controller.kp", "kp must be > 0")
    for key in ("ki", "kd"):
        vals = controller[key] if isinstance(controller[key], list) else [controller[key]]
        if min(vals) < 0:
            _fail(f"controller.{key}", f"{key} must be >= 0")
    controller["integral_clamp"] = _number(controller["integral_clamp"], "controller.integral_clamp", positive=True)

    ref = _mapping(data["reference"], "reference")
    kind = _choice(ref, "reference", {"goal", "waypoints"})
    if kind == "goal":
        _keys(ref, "reference", {"type", "x"}, set())
        reference = {"type": "goal", "x": _vector(ref["x"], "reference.x", n_x)}
    else:
        _keys(ref, "reference", {"type", "points", "times"}, set())
        if not isinstance(ref["points"], list) or not ref["points"]:
            _fail("reference.points", "waypoints need at least one point")
        points = [_vector(p, f"reference.points[{k}]", n_x) for k, p in enumerate(ref["points"])]
        times = _vector(ref["times"], "reference.times", len(points))
        if any(b <= a for a, b in zip(times, times[1:])):
            _fail("reference.times", "waypoint times must be strictly increasing")
        reference = {"type": "waypoints", "points": points, "times": times}

    x0 = _vector(data["x0"], "x0", n_x)
    dt = _number(data.get("dt", DEFAULTS["dt"]), "dt", positive=True)
    t_end = _number(data["t_end"], "t_end", positive=True)
    if t_end < dt:
        _fail("t_end", "t_end must be at least one step")
    log_every = data.get("log_every", DEFAULTS["log_every"])
    if isinstance(log_every, bool) or not isinstance(log_every, int) or log_every < 1:
        _fail("log_every", "log_every must be a positive integer")
    oracle = data.get("oracle", DEFAULTS["oracle"])
    if not isinstance(oracle, bool):
        _fail("oracle", "oracle must be true or false")

    return ScenarioConfig(
        name, description, model, workspace, obstacles, robot, sampling, barrier, alpha,
        robustness, disturbance, controller, reference, x0, dt, t_end, log_every, oracle,
    )


def parse_scenario(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return from_dict(data)


def load_scenario(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_scenario(text)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.to_json())
