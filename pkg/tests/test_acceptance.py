"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N ...: PASS/FAIL`` line in the terminal
summary (see conftest). Runtimes are measured after a short warm-up call so
kernel compilation is not counted.
"""
import time

import numpy as np
import pytest

from seqaction import (
    QuadraticTrackingCost,
    SacParams,
    SystemModel,
    ZenoError,
    equilibrium_feedback_gain,
    integrate_smooth,
    optimal_action_schedule,
    run_closed_loop,
    simulate_adjoint,
)
from seqaction._jit import njit
from seqaction.benchmarks import build_benchmark, slip, terrain
from seqaction.benchmarks.bouncing import apex_heights
from seqaction.benchmarks.cart_pendulum import linearization
from seqaction.cli import ic_grid, sweep_ics
from seqaction.objectives import eval_comparison_metric, wrap_angle
from seqaction.verify import bounce_1d_numbers, suite_adjoint, suite_gradient, suite_optimality

pytestmark = pytest.mark.slow


def timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


def closed_loop(b, duration=None, warm=True, **kw):
    if warm:
        run_closed_loop(b.model, b.cost, b.params, b.x0, 2 * b.params.t_s, q0=b.q0, supervisor=b.stabilizer, raise_on_error=False)
    return timed(
        run_closed_loop, b.model, b.cost, b.params, b.x0, b.duration if duration is None else duration,
        q0=b.q0, supervisor=b.stabilizer, plant_dt=b.plant_dt, **kw,
    )


def assert_checks(checks):
    failed = [c for c in checks if not c.passed]
    assert not failed, "; ".join(f"{c.name}: {c.value:.3g} > {c.limit:.3g} {c.detail}" for c in failed)


def test_criterion_01_bounce_reproduction():
    bounce_1d_numbers()
    r, wall = timed(bounce_1d_numbers)
    assert r["nu_adjoint"] == pytest.approx(4.0, abs=0.02)
    assert r["nu_forward"] == pytest.approx(4.0, abs=0.02)
    assert r["dt_deps"] == pytest.approx(-0.4, rel=0.01)
    assert np.abs(r["Pi"] - r["Pi_reference"]).max() <= 1e-9
    assert wall < 1.0


def test_criterion_02_adjoint_constancy():
    suite_adjoint(seed=1, samples=1)
    checks, wall = timed(suite_adjoint, seed=0, samples=20)
    assert_checks(checks)
    assert wall < 10.0


def test_criterion_03_gradient_oracle():
    suite_gradient(seed=1, samples=1)
    checks, wall = timed(suite_gradient, seed=0)
    assert_checks(checks)
    assert wall < 30.0


def test_criterion_04_closed_form_optimality():
    suite_optimality(seed=1, nodes=1)
    checks, wall = timed(suite_optimality, seed=0, nodes=20)
    assert_checks(checks)
    assert wall < 30.0


def test_criterion_05_swingup_cost():
    b = build_benchmark("cart_pendulum_swingup")
    r, wall = closed_loop(b)
    mc = b.metric
    J = eval_comparison_metric(r.trajectory, np.diag(mc["Q"]), np.diag(mc["R"]), mc["T_opt"], angle_indices=mc["angle_indices"])
    assert np.all(np.abs(r.trajectory.controls) <= 25.0)
    assert J <= 2700.0, f"J_pend = {J:.1f}"
    assert wall < 60.0


def test_criterion_06_barrier_constraint():
    b = build_benchmark("cart_pendulum_barrier")
    r, wall = closed_loop(b)
    X = r.trajectory.states
    theta_f = float(wrap_angle(X[-1, 0]))
    assert np.abs(X[:, 2]).max() <= 2.0, f"max |x_c| = {np.abs(X[:, 2]).max():.3f}"
    assert abs(theta_f) < 0.1, f"theta(10 s) = {theta_f:.3f}"
    assert wall < 60.0


def _two_link_run(name):
    b = build_benchmark(name)
    r, wall = closed_loop(b, raise_on_error=False)
    assert r.error is None, str(r.error)
    U = r.trajectory.controls
    assert np.all(U >= b.params.u_min) and np.all(U <= b.params.u_max)
    return b, r


def _held_after_switch(r, hold, tol):
    """Largest wrapped link angle over the last ``hold`` seconds, which must all be under LQR."""
    T = r.trajectory.times
    X = r.trajectory.states
    assert T[-1] - r.switched_at >= hold, "LQR was in charge for less than the hold time"
    tail = T >= T[-1] - hold
    worst = float(np.abs(wrap_angle(X[tail][:, [0, 2]])).max())
    return worst, worst <= tol


def test_criterion_07a_pendubot():
    b, r = _two_link_run("pendubot")
    assert r.switched_at is not None and r.switched_at <= 5.0, f"switch at {r.switched_at}"
    worst, held = _held_after_switch(r, 5.0, 0.05)
    assert held, f"LQR hold failed (max angle {worst:.3f}); check the two-link angle convention"


def test_criterion_07b_acrobot():
    b, r = _two_link_run("acrobot")
    assert r.switched_at is not None and r.switched_at <= 25.0, f"switch at {r.switched_at}"
    worst, held = _held_after_switch(r, 5.0, 0.25)
    assert held, f"LQR hold failed (max angle {worst:.3f}); check the two-link angle convention"
    assert np.abs(wrap_angle(r.trajectory.states[-1, [0, 2]])).max() < 0.01


def test_criterion_08_ic_sweep():
    grid = ic_grid()
    rng = np.random.default_rng(0)
    ics = grid[np.sort(rng.choice(len(grid), size=20, replace=False))]
    sweep_ics(ics[:1], {"run": {"duration": 0.02}})
    rows, wall = timed(sweep_ics, ics)
    bad = [(round(r["theta0"], 3), round(r["omega0"], 3)) for r in rows if not r["converged"]]
    assert not bad, f"not converged from {bad}"
    assert wall < 600.0


def _ball_run(name):
    b = build_benchmark(name)
    r, wall = closed_loop(b)
    assert wall < 60.0
    T = r.trajectory.times
    X = r.trajectory.states
    assert abs(X[-1, 0] - 1.0) <= 0.05, f"x_b(10 s) = {X[-1, 0]:.3f}"
    return T, X, r


def test_criterion_09a_ball_up():
    T, X, r = _ball_run("ball_up")
    apexes = apex_heights(T, X[:, 1], X[:, 3])
    post = [a for a in apexes if r.trajectory.transition_times.size and a[0] > r.trajectory.transition_times[0]]
    rises = [b[1] > a[1] for a, b in zip(post, post[1:])]
    assert any(rises), "no apex exceeded its predecessor"


def test_criterion_09b_ball_down():
    T, X, r = _ball_run("ball_down")
    late = (T >= 9.0) & (T <= 10.0)
    assert X[late, 1].max() < 0.05, f"max height in [9, 10] s = {X[late, 1].max():.3f}"


def test_criterion_10_slip_stairs():
    b = build_benchmark("slip_stairs")
    try:
        r, wall = closed_loop(b)
    except ZenoError as exc:  # pragma: no cover - reported as a failure
        pytest.fail(f"Zeno: {exc}")
    X = r.trajectory.states
    tp = b.model.params[4:]
    ground = terrain.ground_height(tp, X[:, 0])
    assert np.all(X[:, 4] > ground), "mass went below the terrain"
    stance = r.trajectory.locations == slip.STANCE
    assert all(slip.leg_length(b.model, x) > 0 for x in X[stance])
    climb = X[-1, 4] - X[0, 4]
    assert climb >= 1.5, f"climbed {climb:.2f} m"
    assert wall < 300.0


@njit
def _lin_drift(t, x, p):
    return np.array([x[1], p[0] * x[0]])


@njit
def _lin_input(t, x, p):
    return np.array([[0.0], [p[1]]])


@njit
def _lin_jac(t, x, u, p):
    return np.array([[0.0, 1.0], [p[0], 0.0]])


def test_criterion_11_equilibrium_feedback():
    A, B = linearization()
    model = SystemModel(2, 1, _lin_drift, _lin_input, _lin_jac, params=[A[1, 0], B[1, 0]])
    Q, P1, R = np.diag([10.0, 1.0]), np.zeros((2, 2)), np.array([[1.0]])
    T, alpha_d = 0.5, -10.0
    cost = QuadraticTrackingCost(Q, P1)
    params = SacParams(T=T, t_s=0.01, R=R, u_min=[-25.0], u_max=[25.0], alpha_d=alpha_d, dt=1e-3)
    warm = integrate_smooth(model, [1e-3, 0.0], None, (0.0, T), params.dt)
    optimal_action_schedule(warm, simulate_adjoint(warm, cost), params, alpha_d=alpha_d)
    start = time.perf_counter()
    K, _, _ = equilibrium_feedback_gain(A, B, Q, P1, R, T, alpha_d, steps=500)
    direction = np.array([0.6, 0.8])
    ratios = []
    for size in (1e-2, 1e-3, 1e-4):
        x0 = size * direction
        traj = integrate_smooth(model, x0, None, (0.0, T), params.dt)
        sched = optimal_action_schedule(traj, simulate_adjoint(traj, cost), params, alpha_d=alpha_d)
        ratios.append(np.linalg.norm(sched.u2_star[0] + K @ x0) / size)
    assert ratios[0] > ratios[1] > ratios[2], f"ratios {ratios}"
    assert ratios[2] <= 1e-3
    assert time.perf_counter() - start < 5.0
