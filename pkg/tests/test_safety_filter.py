import itertools
import math

import numpy as np
import pytest

from sampled_cbf.barrier import BarrierConfig, Linear, barrier_value
from sampled_cbf.distance import DistanceEvaluation, evaluate_distance
from sampled_cbf.dynamics import single_integrator
from sampled_cbf.errors import Infeasible, OutsideDomain
from sampled_cbf.geometry import Disc, RobotBody, SampledShape, sample_boundary_grid
from sampled_cbf.safety_filter import (
    FEASIBILITY_TOL,
    InputErrorBound,
    Nominal,
    SafetyConstraint,
    UnstructuredBound,
    build_constraints,
    filter_input,
    solve_filter_qp,
)
from sampled_cbf.scenarios import build_world, load_scenario
from sampled_cbf.tracking import pid_control

IDENTITY = single_integrator(3)


def evaluation(*zetas):
    return DistanceEvaluation(1.0, np.array(zetas, dtype=float))


def as_arrays(cons):
    return np.array([c.a for c in cons]), np.array([c.c for c in cons])


# constraint assembly -----------------------------------------------------------------


def test_nominal_constraint():
    (con,) = build_constraints(np.zeros(3), 0.0, evaluation([-2, 0, 0]), 0.94, IDENTITY)
    np.testing.assert_array_equal(con.a, [-2.0, 0.0, 0.0])
    assert con.c == 0.94 and con.robust_margin == 0.0


def test_unstructured_margin():
    D = 0.4 * math.sqrt(3)
    (con,) = build_constraints(np.zeros(3), 0.0, evaluation([-2, 0, 0]), 0.94, IDENTITY, robust=UnstructuredBound(D))
    assert con.robust_margin == pytest.approx(2 * 0.6928203230275509)
    assert con.c == pytest.approx(0.94 - 2 * D)


def test_input_error_margin_uses_row_norm():
    model = single_integrator(3)
    zeta = np.array([3.0, 4.0, 0.0])
    (con,) = build_constraints(np.zeros(3), 0.0, evaluation(zeta), 1.0, model, robust=InputErrorBound(lambda x, t: 0.1 * (1 + t)))
    assert con.robust_margin == pytest.approx(0.5)
    (con,) = build_constraints(np.zeros(3), 1.0, evaluation(zeta), 1.0, model, robust=InputErrorBound(lambda x, t: 0.1 * (1 + t)))
    assert con.robust_margin == pytest.approx(1.0)


def test_negative_bound_rejected():
    with pytest.raises(ValueError):
        build_constraints(np.zeros(3), 0.0, evaluation([1, 0, 0]), 1.0, IDENTITY, robust=UnstructuredBound(-0.1))


def test_symmetric_gradients_give_slab():
    cons = build_constraints(np.zeros(3), 0.0, evaluation([2, 0, 0], [-2, 0, 0]), 0.94, IDENTITY)
    assert len(cons) == 2
    for u1, inside in [(0.0, True), (0.47, True), (-0.47, True), (0.48, False), (-0.48, False)]:
        assert all(c.residual([u1, 5.0, -5.0]) >= 0 for c in cons) == inside


def test_domain_gate():
    with pytest.raises(OutsideDomain):
        build_constraints(np.zeros(3), 0.0, evaluation([1, 0, 0]), -0.1, IDENTITY, r_bar=0.05)
    with pytest.raises(OutsideDomain):
        build_constraints(np.zeros(3), 0.0, evaluation([1, 0, 0]), -0.05, IDENTITY, r_bar=0.05)
    build_constraints(np.zeros(3), 0.0, evaluation([1, 0, 0]), -0.025, IDENTITY, r_bar=0.05)


# QP examples ------------------------------------------------------------------------


def test_qp_interior_passthrough():
    con = SafetyConstraint(np.array([-2.0, 0, 0]), 0.94)
    res = solve_filter_qp(np.zeros(3), [con])
    assert res.u_star.tolist() == [0.0, 0.0, 0.0] and not res.modified


def grid_1d(a, c, lo, hi, u_d, step=1e-4):
    grid = np.arange(lo, hi + step / 2, step)
    ok = np.all(np.outer(grid, a) + c >= 0, axis=1)
    return grid[ok][np.argmin((grid[ok] - u_d) ** 2)]


def test_qp_half_space_projection():
    con = SafetyConstraint(np.array([-2.0, 0, 0]), 0.94)
    res = solve_filter_qp(np.array([1.0, 0, 0]), [con])
    np.testing.assert_allclose(res.u_star, [0.47, 0, 0], atol=1e-15)
    assert res.modified and res.active_constraints == (0,)
    assert abs(grid_1d(np.array([-2.0]), np.array([0.94]), 0.0, 1.0, 1.0) - 0.47) <= 1e-4


def test_qp_second_constraint_slack():
    cons = [SafetyConstraint(np.array([-2.0, 0, 0]), 0.94), SafetyConstraint(np.array([2.0, 0, 0]), 0.94)]
    res = solve_filter_qp(np.array([1.0, 0, 0]), cons)
    np.testing.assert_allclose(res.u_star, [0.47, 0, 0], atol=1e-15)
    assert res.active_constraints == (0,)
    assert abs(grid_1d(np.array([-2.0, 2.0]), np.array([0.94, 0.94]), 0.0, 1.0, 1.0) - 0.47) <= 1e-4


def test_empty_constraints_return_u_d():
    u_d = np.array([0.3, -1.0])
    res = solve_filter_qp(u_d, [])
    assert res.u_star.tolist() == u_d.tolist() and not res.modified


def test_infeasible_reported():
    cons = [SafetyConstraint(np.array([1.0, 0.0]), -1.0), SafetyConstraint(np.array([-1.0, 0.0]), -1.0)]
    with pytest.raises(Infeasible):
        solve_filter_qp(np.zeros(2), cons)


# random instances --------------------------------------------------------------------


def random_instance(rng):
    n_u = int(rng.integers(1, 4))
    m = int(rng.integers(1, 6))
    A = rng.normal(size=(m, n_u))
    u0 = rng.uniform(-0.5, 0.5, n_u)
    c = -A @ u0 + rng.uniform(0.0, 0.5, m)  # u0 is feasible
    u_d = rng.uniform(-1.0, 1.0, n_u)
    return u_d, A, c


def enumerate_projection(u_d, A, c):
    """Exact projection by trying every candidate active set of size <= n_u."""
    n_u = len(u_d)
    best, best_val = None, math.inf
    for k in range(0, min(len(c), n_u) + 1):
        for S in itertools.combinations(range(len(c)), k):
            if k == 0:
                u = u_d.copy()
            else:
                As = A[list(S)]
                gram = As @ As.T
                if np.linalg.cond(gram) > 1e10:
                    continue
                lam = np.linalg.solve(gram, -(As @ u_d + c[list(S)]))
                u = u_d + As.T @ lam
            if np.all(A @ u + c >= -1e-9):
                val = float(np.sum((u - u_d) ** 2))
                if val < best_val:
                    best, best_val = u, val
    return best


def test_qp_matches_enumeration_and_kkt():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        u_d, A, c = random_instance(rng)
        cons = [SafetyConstraint(A[i], c[i]) for i in range(len(c))]
        res = solve_filter_qp(u_d, cons)
        u = res.u_star
        oracle = enumerate_projection(u_d, A, c)
        assert np.max(np.abs(u - oracle)) <= 2e-3
        residual = A @ u + c
        assert np.all(residual >= -FEASIBILITY_TOL)
        # KKT: u - u_d = sum lam_i a_i with lam >= 0 on binding rows, zero elsewhere
        lam = np.asarray(res.multipliers)
        assert np.all(lam >= -1e-12)
        assert np.linalg.norm(u - u_d - A.T @ lam) <= 1e-6
        assert np.all(np.abs(lam * residual) <= 1e-6)


def grid_search(u_d, A, c, lo, hi, step):
    axes = [np.arange(l, h + step / 2, step) for l, h in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(u_d))
    ok = np.all(pts @ A.T + c >= 0, axis=1)
    return pts[ok][np.argmin(np.sum((pts[ok] - u_d) ** 2, axis=1))]


def test_qp_matches_grid_search_low_dimension():
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 40:
        u_d, A, c = random_instance(rng)
        n_u = len(u_d)
        if n_u > 2:
            continue
        res = solve_filter_qp(u_d, [SafetyConstraint(A[i], c[i]) for i in range(len(c))])
        # exhaustive pass at 1e-3, then a 1e-5 pass around its winner; a single
        # 1e-3 grid is itself off by several steps near shallow vertices
        grid_best = grid_search(u_d, A, c, np.full(n_u, -1.6), np.full(n_u, 1.6), 1e-3)
        grid_best = grid_search(u_d, A, c, grid_best - 5e-3, grid_best + 5e-3, 1e-5)
        assert np.max(np.abs(res.u_star - grid_best)) <= 2e-3
        checked += 1


def test_passthrough_bit_exact():
    rng = np.random.default_rng(2)
    for _ in range(500):
        u_d, A, c = random_instance(rng)
        c = c + np.maximum(0.0, -(A @ u_d + c)) + 1e-9  # make u_d strictly feasible
        res = solve_filter_qp(u_d, [SafetyConstraint(A[i], c[i]) for i in range(len(c))])
        assert res.u_star.tobytes() == u_d.tobytes() and not res.modified


def test_minimum_norm_against_random_feasible_points():
    rng = np.random.default_rng(3)
    for _ in range(50):
        u_d, A, c = random_instance(rng)
        res = solve_filter_qp(u_d, [SafetyConstraint(A[i], c[i]) for i in range(len(c))])
        dist = np.linalg.norm(res.u_star - u_d)
        found = 0
        while found < 1000:
            cand = rng.uniform(-3, 3, size=(4000, len(u_d)))
            cand = cand[np.all(cand @ A.T + c >= 0, axis=1)][: 1000 - found]
            found += len(cand)
            assert np.all(np.linalg.norm(cand - u_d, axis=1) >= dist - 1e-12)


def test_robust_dominance():
    rng = np.random.default_rng(4)
    model = single_integrator(3)
    for _ in range(200):
        zetas = rng.normal(size=(int(rng.integers(1, 4)), 3))
        ev = evaluation(*zetas)
        b, x = float(rng.uniform(0, 2)), np.zeros(3)
        nominal = build_constraints(x, 0.0, ev, b, model)
        robust = build_constraints(x, 0.0, ev, b, model, robust=UnstructuredBound(0.3))
        u_d = rng.normal(size=3) * 3
        try:
            u = solve_filter_qp(u_d, robust).u_star
        except Infeasible:
            continue
        assert all(con.residual(u) >= -FEASIBILITY_TOL for con in nominal)


# pipeline -----------------------------------------------------------------------------


def point_world():
    body = RobotBody(SampledShape([[0.0, 0.0]]))
    obstacles = sample_boundary_grid(Disc((0, 0), 1.0), 200)
    return body, obstacles, BarrierConfig.from_fraction(0.01, 0.05)


def test_filter_far_from_obstacles_is_bit_exact():
    body, obstacles, cfg = point_world()
    u_d = np.array([0.1234, -0.5, 0.75])
    step = filter_input([10.0, 10.0, 0.0], 0.0, body, obstacles, cfg, IDENTITY, u_d_fn=u_d)
    assert step.u_star.tobytes() == u_d.tobytes() and not step.result.modified
    assert step.assemble_time >= 0 and step.qp_time >= 0


def test_filter_refuses_outside_domain():
    body, obstacles, cfg = point_world()
    with pytest.raises(OutsideDomain):
        filter_input([1.0, 0.0, 0.0], 0.0, body, obstacles, cfg, IDENTITY, u_d_fn=np.zeros(3))


def test_filter_callable_nominal():
    body, obstacles, cfg = point_world()
    step = filter_input([1.3, 0.0, 0.0], 0.0, body, obstacles, cfg, IDENTITY, u_d_fn=lambda x, t: -x)
    assert step.result.modified
    for con in step.constraints:
        assert con.residual(step.u_star) >= -FEASIBILITY_TOL


def test_deadlock_pose(scenario_path):
    cfg = load_scenario(scenario_path("deadlock"))
    world = build_world(cfg)
    x = np.array([6.0, 5.0, 0.0])  # inside the U, just above its bottom bar
    u_d, _ = pid_control(world.gains, x, world.reference(0.0), cfg.dt, model=world.model)
    tol = cfg.barrier["activation_tolerance"]
    step = filter_input(x, 0.0, world.body, world.obstacle_samples, world.barrier, world.model, world.alpha, world.robust, u_d, tol)
    assert step.result.modified and np.any(step.u_star != u_d)
    xdot = world.model.f(x) + world.model.g(x) @ step.u_star
    b = barrier_value(step.evaluation, world.barrier)
    for zeta in step.evaluation.gradients:
        assert zeta @ xdot + world.alpha(b) >= -1e-8
