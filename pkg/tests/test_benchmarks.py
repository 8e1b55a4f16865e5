import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqaction import ConfigError, UsageError, eval_guard, eval_input_map, integrate_hybrid, integrate_smooth
from seqaction.benchmarks import DEFAULTS, build_benchmark, slip, terrain, two_link
from seqaction.benchmarks.bouncing import apex_heights
from seqaction.benchmarks.cart_pendulum import pendulum_energy
from seqaction.benchmarks.lqr import LqrStabilizer, lqr_stabilize


@given(st.floats(-1.0, 4.0), st.sampled_from(["stairs", "sinusoid"]))
def test_terrain_slope_matches_height(x, kind):
    tp = terrain.terrain(kind)
    h = 1e-6
    fd = (terrain.height(x + h, tp) - terrain.height(x - h, tp)) / (2 * h)
    assert terrain.slope(x, tp) == pytest.approx(fd, rel=1e-5, abs=1e-5)


def test_stairs_profile():
    tp = terrain.terrain("stairs")
    assert terrain.height(0.0, tp) == pytest.approx(0.0, abs=1e-12)
    assert terrain.height(5.0, tp) == pytest.approx(2.0, abs=1e-9)
    # halfway up the first step at its edge
    assert terrain.height(0.7, tp) == pytest.approx(0.25, abs=1e-9)
    with pytest.raises(UsageError):
        terrain.terrain("cliff")


def test_slip_guard_and_leg():
    m = slip.slip(terrain.terrain("flat"))
    x = np.array([0.0, 0.7, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0])
    # toe below the mass with the leg at rest length: touching down exactly
    assert eval_guard(m, "flight", "stance", x) == pytest.approx(0.0, abs=1e-12)
    assert slip.leg_length(m, x) == pytest.approx(1.0)
    x[4] = 0.9
    assert slip.leg_length(m, x) == pytest.approx(0.9)
    f = slip.slip_location_dynamics(m, x, [0.0, 0.0, 0.0], "stance")
    # compressed spring pushes the mass up: k (l0 - l) / m - g
    assert f[5] == pytest.approx(100.0 * 0.1 - 9.81)


def test_slip_inputs_split_by_location():
    m = slip.slip()
    x = np.array([0.3, 0.7, 0.1, 0.0, 1.2, 0.0, 0.2, 0.05])
    flight = eval_input_map(m, 0.0, x, "flight")
    stance = eval_input_map(m, 0.0, x, "stance")
    assert np.all(flight[:, 2] == 0.0) and np.all(stance[:, :2] == 0.0)
    assert flight[6, 0] == 1.0 and flight[7, 1] == 1.0


def test_slip_hop_lands_and_lifts_off():
    b = build_benchmark("slip_stairs", {"model": {"terrain": "flat"}})
    traj = integrate_hybrid(b.model, "flight", [0.0, 0.5, 0.0, 0.0, 1.3, 0.0, 0.0, 0.0], None, (0.0, 1.2), 1e-3)
    assert traj.location_sequence[:3] == ("flight", "stance", "flight")
    stance = traj.locations == 1
    ls = np.array([slip.leg_length(b.model, x) for x in traj.states[stance]])
    assert np.all(ls > 0) and np.all(ls <= 1.0 + 1e-9)


def test_apex_heights_of_parabola():
    t = np.linspace(0.0, 1.0, 101)
    z = 2.0 * t - 1.5 * t ** 2
    zd = 2.0 - 3.0 * t
    apexes = apex_heights(t, z, zd)
    assert apexes.shape == (1, 2)
    assert apexes[0, 0] == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert apexes[0, 1] == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_free_ball_apexes_repeat(ball):
    traj = integrate_hybrid(ball, "q1", [0.0, 0.5, 0.0, 0.0], None, (0.0, 2.0), 1e-3)
    apexes = apex_heights(traj.times, traj.states[:, 1], traj.states[:, 3])
    assert len(apexes) >= 2
    np.testing.assert_allclose(apexes[:, 1], 0.5, atol=1e-9)


def test_build_benchmark_errors():
    with pytest.raises(UsageError):
        build_benchmark("unicycle")
    with pytest.raises(ConfigError):
        build_benchmark("double_integrator", {"typo": {}})
    with pytest.raises(ConfigError):
        build_benchmark("double_integrator", {"run": {"x0": [1.0]}})
    with pytest.raises(ConfigError):
        build_benchmark("double_integrator", {"controller": {"horizon": 1.0}})


@pytest.mark.parametrize("name", sorted(DEFAULTS))
def test_every_default_builds(name):
    b = build_benchmark(name)
    assert b.x0.shape == (b.model.n,)
    assert b.params.m == b.model.m


def test_lqr_output_is_clamped():
    u = lqr_stabilize([[10.0, 0.0]], [1.0, 0.0], [0.0, 0.0], ([-7.0], [7.0]))
    assert u[0] == -7.0
    u = lqr_stabilize([[1.0, 0.0]], [2 * np.pi - 0.1, 0.0], [0.0, 0.0], ([-7.0], [7.0]), angle_indices=[0])
    assert u[0] == pytest.approx(0.1)
    s = LqrStabilizer([[1.0, 0.0, 1.0, 0.0]], np.zeros(4), [-1.0], [1.0], (0, 2), 0.05, (0, 2))
    assert s.ready(0.0, [2 * np.pi + 0.01, 5.0, -0.02, 0.0])
    assert not s.ready(0.0, [0.1, 0.0, 0.0, 0.0])


@pytest.mark.parametrize("kind", ["pendubot", "acrobot"])
def test_two_link_energy_conserved(kind):
    m = two_link.two_link(kind)
    params = dict(two_link.PENDUBOT if kind == "pendubot" else two_link.ACROBOT)
    traj = integrate_smooth(m, [2.0, 0.5, 2.5, -1.0], None, (0.0, 1.0), 1e-3)
    E = two_link.energy(params, traj.states)
    assert np.abs(E - E[0]).max() <= 1e-6


@pytest.mark.parametrize("kind", ["pendubot", "acrobot"])
def test_two_link_inertia_positive(kind, rng):
    params = dict(two_link.PENDUBOT if kind == "pendubot" else two_link.ACROBOT)
    for _ in range(20):
        M = two_link.mass_matrix(params, rng.uniform(-np.pi, np.pi, 4))
        np.testing.assert_allclose(M, M.T)
        assert np.all(np.linalg.eigvalsh(M) > 0)


def test_cart_pendulum_energy_conserved(cart):
    traj = integrate_smooth(cart, [2.0, 1.0], None, (0.0, 1.0), 1e-3)
    E = pendulum_energy(traj.states)
    assert np.abs(E - E[0]).max() <= 1e-6
