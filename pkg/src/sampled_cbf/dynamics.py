"""Control-affine models, disturbances and fixed-step RK4 integration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, NonFiniteState, NumericalFailure

MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ControlAffineModel:
    """``xdot = f(x) + g(x) u`` with ``g(x) g(x)^T`` invertible."""

    n_x: int
    n_u: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    name: str = "control-affine"
    full_row_rank_certified: bool = False

    def check_rank(self, x):
        """Raise if ``g(x) g(x)^T`` is singular or too ill-conditioned."""
        gx = self.g(x)
        cond = np.linalg.cond(gx @ gx.T)
        if not cond < MAX_CONDITION:
            raise NumericalFailure(f"g(x) g(x)^T has condition number {cond:.3g} at x={x}")
        return cond


def _zero_drift(n):
    zero = np.zeros(n)
    zero.setflags(write=False)
    return lambda x: zero


def single_integrator(n: int) -> ControlAffineModel:
    eye = np.eye(n)
    eye.setflags(write=False)
    return ControlAffineModel(n, n, _zero_drift(n), lambda x: eye, "single-integrator", True)


def omni_wheel_matrix(l: float = 0.2, r_wheel: float = 0.02) -> np.ndarray:
    c, s = math.cos(math.pi / 6), math.sin(math.pi / 6)
    r = r_wheel
    return np.array(
        [
            [0.0, r * c, -r * c],
            [-r, r * s, r * s],
            [l * r, l * r, l * r],
        ]
    )


@dataclass(frozen=True)
class OmniRobotModel(ControlAffineModel):
    """Three-wheeled omnidirectional robot; state ``(x1, x2, heading)``, inputs are wheel rates."""

    l: float = 0.2
    r_wheel: float = 0.02
    B: np.ndarray = field(default=None, repr=False)
    Bt_inv: np.ndarray = field(default=None, repr=False)


def omni_robot(l: float = 0.2, r_wheel: float = 0.02) -> OmniRobotModel:
    B = omni_wheel_matrix(l, r_wheel)
    if abs(np.linalg.det(B)) == 0:
        raise NumericalFailure("wheel matrix B is singular")
    Bt_inv = np.linalg.inv(B.T)
    Bt_inv.setflags(write=False)

    def g(x):
        return rotation_block(x[2]) @ Bt_inv

    return OmniRobotModel(3, 3, _zero_drift(3), g, "omni", True, l, r_wheel, B, Bt_inv)


def rotation_block(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def omni_g(x, model: OmniRobotModel | None = None) -> np.ndarray:
    """Input matrix ``G(x) (B^T)^-1`` of the omni robot."""
    model = model or _DEFAULT_OMNI
    return model.g(np.asarray(x, dtype=float))


def step_rk4(model: ControlAffineModel, x, u, d, dt: float) -> np.ndarray:
    """One classical RK4 step of ``f(x) + g(x) u + d`` with ``u`` and ``d`` held over the step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (model.n_x,) or u.shape != (model.n_u,):
        raise DimensionMismatch(f"expected x in R^{model.n_x}, u in R^{model.n_u}")
    f, g = model.f, model.g

    def rhs(z):
        return f(z) + g(z) @ u + d

    k1 = rhs(x)
    k2 = rhs(x + 0.5 * dt * k1)
    k3 = rhs(x + 0.5 * dt * k2)
    k4 = rhs(x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteState(f"non-finite state {out} after RK4 step from {x}")
    return out


# ---------------------------------------------------------------------------
# disturbances


@dataclass(frozen=True)
class NoDisturbance:
    space = "state"

    @property
    def bound(self):
        return 0.0


@dataclass(frozen=True)
class UniformBox:
    """i.i.d. per-step draws, uniform in ``[-half_width, half_width]`` per coordinate.

    ``space`` is ``"state"`` for an additive state-derivative disturbance or
    ``"input"`` for an error added to the applied input after filtering.
    """

    half_width: tuple
    seed: int = 0
    space: str = "state"

    def __post_init__(self):
        hw = tuple(float(h) for h in np.atleast_1d(self.half_width))
        if any(h < 0 for h in hw):
            raise ValueError("half widths must be non-negative")
        object.__setattr__(self, "half_width", hw)
        if self.space not in ("state", "input"):
            raise ValueError("space must be 'state' or 'input'")

    @property
    def bound(self):
        """Largest possible Euclidean norm of a draw."""
        return float(np.linalg.norm(self.half_width))

    def draw(self, step_index: int) -> np.ndarray:
        """Draw for one step; a pure function of ``(seed, step_index)``."""
        block, row = divmod(int(step_index), DRAW_BLOCK)
        return _uniform_block(self.seed, self.half_width, block)[row].copy()


# draws are generated in blocks of this many steps, each block from its own stream
DRAW_BLOCK = 1024


@lru_cache(maxsize=8)
def _uniform_block(seed, half_width, block):
    hw = np.asarray(half_width)
    rng = np.random.default_rng([seed, block])
    out = rng.uniform(-hw, hw, size=(DRAW_BLOCK, hw.shape[0]))
    out.setflags(write=False)
    return out


DisturbanceModel = NoDisturbance | UniformBox


def sample_disturbance(dm, x, t, step_index, model: ControlAffineModel | None = None) -> np.ndarray:
    """State-derivative disturbance realised at this step.

    For input-space errors ``e`` this is ``g(x) e`` (needs ``model``).
    """
    x = np.asarray(x, dtype=float)
    if isinstance(dm, NoDisturbance):
        return np.zeros(x.shape[0])
    draw = dm.draw(step_index)
    if dm.space == "input":
        if model is None:
            raise ValueError("input-space disturbance needs the model to map through g(x)")
        return model.g(x) @ draw
    if draw.shape != x.shape:
        raise DimensionMismatch("disturbance and state dimensions differ")
    return draw


_DEFAULT_OMNI = omni_robot()
