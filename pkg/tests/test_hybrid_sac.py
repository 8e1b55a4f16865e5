import numpy as np
import pytest

from seqaction import (
    PiecewiseControl,
    QuadraticTrackingCost,
    UsageError,
    augment_mayer,
    eval_cost,
    hybrid_sensitivity,
    integrate_hybrid,
    integrate_smooth,
    mode_insertion_gradient,
    propagate_variation,
    simulate_adjoint,
    simulate_hybrid_adjoint,
    terminal_gradient,
    terminal_sensitivity,
    transition_time_derivative,
)
from seqaction.benchmarks import build_benchmark
from seqaction.verify import bounce_1d_numbers, constancy_deviation


@pytest.fixture(scope="module")
def drop():
    b = build_benchmark("bounce_1d")
    traj = integrate_hybrid(b.model, "q1", b.x0, None, (0.0, 2.6), 1e-3)
    aug = augment_mayer(b.model, b.cost)
    return b, traj, aug, simulate_hybrid_adjoint(aug, traj)


@pytest.fixture(scope="module")
def ball_case():
    b = build_benchmark("ball_down")
    u = PiecewiseControl(2, [0.0], [3.0], [[1.0, -2.0]])
    traj = integrate_hybrid(b.model, "q1", [0.0, 1.0, 0.5, 0.0], u, (0.0, 2.0), 1e-3)
    aug = augment_mayer(b.model, b.cost)
    return b, traj, aug, simulate_hybrid_adjoint(aug, traj)


def test_bounce_reference_numbers():
    r = bounce_1d_numbers()
    assert r["nu_adjoint"] == pytest.approx(4.0, abs=0.02)
    assert r["nu_forward"] == pytest.approx(r["nu_adjoint"], abs=1e-6)
    assert r["dt_deps"] == pytest.approx(-0.4, rel=0.01)
    assert r["dt_shift"] == pytest.approx(-0.04, abs=5e-4)
    np.testing.assert_allclose(r["Pi"], r["Pi_reference"], atol=1e-9)


def test_cost_coordinate_of_costate_is_one(drop):
    *_, adj = drop
    assert np.all(adj.rho_bar[:, 0] == 1.0)


def test_smooth_systems_reduce_to_insertion_gradient(cart):
    cost = QuadraticTrackingCost(np.diag([10.0, 1.0]), angle_indices=[0])
    traj = integrate_smooth(cart, [2.5, 0.3], PiecewiseControl(1, [0.0], [2.0], [[1.5]]), (0.0, 1.0), 1e-3)
    aug = augment_mayer(cart, cost)
    hadj = simulate_hybrid_adjoint(aug, traj)
    np.testing.assert_allclose(hadj.rho, simulate_adjoint(traj, cost).rho)
    for tau in (0.1, 0.37, 0.8):
        assert hybrid_sensitivity(hadj, traj, tau, [-3.0]) == pytest.approx(
            mode_insertion_gradient(traj, simulate_adjoint(traj, cost), tau, [-3.0]), rel=1e-12, abs=1e-12
        )


def test_unchanged_control_gives_no_variation(ball_case):
    b, traj, aug, _ = ball_case
    var = propagate_variation(aug, traj, 0.3, [1.0, -2.0])
    assert np.abs(var.psi_bar).max() == 0.0


@pytest.mark.parametrize("tau", [0.05, 0.2, 0.9, 1.7])
def test_sensitivity_constant_across_impacts(drop, tau):
    b, traj, aug, adj = drop
    dev, nu = constancy_deviation(aug, traj, adj, tau, [-5.0])
    assert dev <= 1e-5 * abs(nu) + 1e-9


def test_adjoint_jump_is_transposed_reset(ball_case):
    b, traj, aug, adj = ball_case
    assert traj.event_nodes.size >= 1
    for k, i in enumerate(traj.event_nodes):
        t_i = traj.times[i]
        u = traj.control(t_i)
        Pi = aug.Pi_bar(int(traj.event_transitions[k]), t_i, traj.states[i], traj.states[i + 1], u, u,
                        traj.locations[i], traj.locations[i + 1])
        np.testing.assert_allclose(adj.rho_bar[i], Pi.T @ adj.rho_bar[i + 1], rtol=1e-10, atol=1e-10)


def test_adjoint_and_forward_sensitivities_agree(ball_case):
    b, traj, aug, adj = ball_case
    for tau, w in ((0.1, [3.0, -5.0]), (0.8, [-4.0, 0.0]), (1.5, [0.0, -9.0])):
        var = propagate_variation(aug, traj, tau, w)
        assert hybrid_sensitivity(adj, traj, tau, w) == pytest.approx(terminal_sensitivity(var, b.cost), abs=1e-6)


def test_transition_time_derivative_by_differences(drop):
    b, traj, aug, _ = drop
    tau, w, eps = 0.1, -5.0, 1e-4
    var = propagate_variation(aug, traj, tau, [w])
    i = int(traj.event_nodes[0])
    row = i - (len(traj.times) - len(var.times))
    fm = np.array([traj.states[i, 1], -9.81])
    dtde = transition_time_derivative(traj.states[i], var.psi_bar[row][1:], lambda x: np.array([1.0, 0.0]), fm)
    pert = integrate_hybrid(b.model, "q1", b.x0, PiecewiseControl(1, [tau - eps], [tau], [[w]]), (0.0, 1.0), 1e-4)
    fd = (pert.transition_times[0] - traj.transition_times[0]) / eps
    assert dtde == pytest.approx(fd, rel=0.01)


def test_perturbation_at_transition_rejected(drop):
    b, traj, aug, adj = drop
    t_i = float(traj.transition_times[0])
    with pytest.raises(UsageError):
        propagate_variation(aug, traj, t_i, [-5.0])
    with pytest.raises(UsageError):
        hybrid_sensitivity(adj, traj, traj.times[-1], [-5.0])


def test_cost_coordinate_matches_running_cost(ball_case):
    b, traj, aug, _ = ball_case
    running = aug.running_integral(traj)
    assert running[0] == 0.0
    terminal = b.cost.terminal(traj.final_state)
    assert running[-1] + terminal == pytest.approx(eval_cost(b.cost, traj), rel=1e-4)


def test_cost_coordinate_for_drop(drop):
    b, traj, aug, _ = drop
    assert aug.running_integral(traj)[-1] == pytest.approx(eval_cost(b.cost, traj), rel=1e-4)


def test_terminal_sensitivity_uses_terminal_gradient(ball_case):
    b, traj, aug, _ = ball_case
    var = propagate_variation(aug, traj, 0.4, [2.0, -3.0])
    expected = var.psi_bar[-1, 0] + terminal_gradient(b.cost, traj.final_state) @ var.psi_bar[-1, 1:]
    assert terminal_sensitivity(var, b.cost) == pytest.approx(expected, rel=1e-12)
