import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqaction import (
    PiecewiseControl,
    QuadraticTrackingCost,
    UsageError,
    barrier_weight,
    control_energy,
    eval_comparison_metric,
    eval_cost,
    incremental_gradient,
    integrate_smooth,
    terminal_gradient,
)
from seqaction.benchmarks import slip, terrain
from seqaction.objectives import running_cost_series, wrap_angle

coords = st.floats(-4.0, 4.0, allow_nan=False)


def fd_grad(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


@given(st.floats(-50.0, 50.0, allow_nan=False))
def test_wrap_range(a):
    w = wrap_angle(a)
    assert -np.pi <= w < np.pi
    assert np.isclose(np.cos(w), np.cos(a), atol=1e-9)


@given(st.lists(coords, min_size=4, max_size=4))
def test_quadratic_gradient(x):
    cost = QuadraticTrackingCost(np.diag([3.0, 1.0, 0.5, 2.0]), np.diag([1.0, 0, 2.0, 0]), x_d=[0.1, 0, -0.3, 0], angle_indices=[0])
    x = np.asarray(x)
    if abs(wrap_angle(x[0] - 0.1)) > np.pi - 1e-3:
        return
    g = incremental_gradient(cost, 0.0, x)
    np.testing.assert_allclose(g, fd_grad(lambda z: cost.running(0.0, z), x), rtol=1e-6, atol=1e-6)
    gm = terminal_gradient(cost, x)
    np.testing.assert_allclose(gm, fd_grad(cost.terminal, x), rtol=1e-6, atol=1e-6)


@given(st.lists(st.floats(-2.5, 2.5), min_size=4, max_size=4))
def test_barrier_gradient(x):
    cost = QuadraticTrackingCost(np.diag([200.0, 0, 0, 50.0]), angle_indices=[0], weight=barrier_weight(2, 2.0, 8.0))
    x = np.asarray(x)
    g = incremental_gradient(cost, 0.0, x)
    np.testing.assert_allclose(g, fd_grad(lambda z: cost.running(0.0, z), x), rtol=1e-5, atol=1e-5)


def test_barrier_weight_value():
    cost = QuadraticTrackingCost(np.zeros((4, 4)), weight=barrier_weight(2, 2.0, 8.0))
    x = np.array([0.0, 0.0, 2.0, 0.0])
    # weight (x_c/2)^8 = 1 at x_c = 2, cost = 0.5 * 1 * 2^2
    assert cost.running(0.0, x) == pytest.approx(2.0)


@given(st.floats(0.0, 6.0), st.floats(0.5, 2.0))
def test_terrain_target_gradient(xm, zm):
    tp = terrain.terrain("stairs")
    n = 8
    Q = np.diag([0.0, 70.0, 0.0, 70.0, 50.0, 0.0, 0.0, 0.0])
    cost = QuadraticTrackingCost(Q, x_d=[0, 0.7, 0, 0.7, 1.4, 0, 0, 0], target=slip.terrain_following_target(tp))
    x = np.array([xm, 0.5, xm, 0.6, zm, 0.1, 0.0, 0.0])
    g = incremental_gradient(cost, 0.0, x)
    np.testing.assert_allclose(g, fd_grad(lambda z: cost.running(0.0, z), x, h=1e-7), rtol=1e-5, atol=1e-4)
    assert g.shape == (n,)


def test_constant_trajectory_cost(di):
    cost = QuadraticTrackingCost(np.diag([2.0, 0.0]), np.diag([4.0, 0.0]))
    traj = integrate_smooth(di, [1.0, 0.0], None, (0.0, 3.0), 0.01)
    # l = 0.5 * 2 * 1 = 1 everywhere; m = 0.5 * 4 * 1 = 2
    assert eval_cost(cost, traj) == pytest.approx(3.0 + 2.0, abs=1e-12)
    series = running_cost_series(cost, traj)
    assert series[0] == 0.0 and series[-1] == pytest.approx(3.0)


def test_matrix_checks():
    with pytest.raises(UsageError):
        QuadraticTrackingCost([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(UsageError):
        QuadraticTrackingCost(np.diag([1.0, -1.0]))
    with pytest.raises(UsageError):
        QuadraticTrackingCost(np.eye(2), P1=np.eye(3))


def test_control_energy_exact():
    u = PiecewiseControl(1, [0.0, 0.5], [1.0, 0.75], [[2.0], [-4.0]])
    # pieces: 2 on [0, .5) and [.75, 1), -4 on [.5, .75)
    expected = 0.5 * 0.3 * (4.0 * 0.75 + 16.0 * 0.25)
    assert control_energy(u, [[0.3]], 0.0, 1.0) == pytest.approx(expected)


def test_comparison_metric_horizon(di):
    traj = integrate_smooth(di, [1.0, 0.0], None, (0.0, 1.0), 0.01)
    with pytest.raises(UsageError):
        eval_comparison_metric(traj, np.eye(2), [[1.0]], T_opt=2.0)
    J = eval_comparison_metric(traj, np.diag([2.0, 0.0]), [[1.0]], T_opt=0.5)
    assert J == pytest.approx(0.5)
