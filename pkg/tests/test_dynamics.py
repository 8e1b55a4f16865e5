import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqaction import (
    GrazingError,
    HybridModel,
    Transition,
    UsageError,
    apply_reset,
    eval_drift,
    eval_dynamics,
    eval_guard,
    eval_guard_gradient,
    eval_input_map,
    eval_linearization,
    variational_reset,
)
from seqaction.benchmarks.two_link import two_link

finite = st.floats(-3.0, 3.0, allow_nan=False)


def fd_jacobian(fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h * max(1.0, abs(x[i]))
        cols.append((fn(x + e) - fn(x - e)) / (2 * e[i]))
    return np.array(cols).T


@given(st.lists(finite, min_size=4, max_size=4), finite)
def test_control_affine_split(cart_full, x, u):
    f = eval_dynamics(cart_full, 0.0, x, [u])
    g = eval_drift(cart_full, 0.0, x)
    h = eval_input_map(cart_full, 0.0, x)
    np.testing.assert_allclose(f, g + h[:, 0] * u, atol=1e-12)


@given(st.lists(finite, min_size=4, max_size=4), finite)
def test_cart_jacobian_matches_differences(cart_full, x, u):
    A = eval_linearization(cart_full, 0.0, x, [u])
    A_fd = fd_jacobian(lambda z: eval_dynamics(cart_full, 0.0, z, [u]), x)
    np.testing.assert_allclose(A, A_fd, atol=1e-6)


@pytest.mark.parametrize("kind", ["pendubot", "acrobot"])
def test_two_link_difference_jacobian(kind):
    m = two_link(kind)
    x = np.array([0.3, -0.2, 2.0, 0.5])
    A = eval_linearization(m, 0.0, x, [1.5])
    A_fd = fd_jacobian(lambda z: eval_dynamics(m, 0.0, z, [1.5]), x, h=1e-5)
    np.testing.assert_allclose(A, A_fd, rtol=1e-5, atol=1e-5)
    # the input only enters the velocity rows
    h = eval_input_map(m, 0.0, x)
    assert h[0, 0] == 0.0 and h[2, 0] == 0.0


def test_reset_preserves_speed(bounce):
    xm = np.array([0.0, -4.4294])
    xp = apply_reset(bounce, "q1", "q2", xm)
    assert abs(abs(xp[1]) - abs(xm[1])) <= 1e-6
    assert xp[1] > 0


def test_reset_needs_guard_zero(bounce):
    with pytest.raises(UsageError):
        apply_reset(bounce, "q1", "q2", [0.5, -1.0])


def test_guard_and_gradient(ball):
    x = np.array([0.2, 0.7, 1.0, -2.0])
    assert eval_guard(ball, "q1", "q2", x) == pytest.approx(0.7)
    np.testing.assert_allclose(eval_guard_gradient(ball, "q1", "q2", x), [0.0, 1.0, 0.0, 0.0])


def test_variational_reset_bounce(bounce):
    g = 9.81
    zd = -4.4294
    xm = np.array([0.0, zd])
    fm = eval_dynamics(bounce, 0.45, xm, [0.0], "q1")
    fp = eval_dynamics(bounce, 0.45, -xm * np.array([-1, 1]), [0.0], "q2")
    Pi = variational_reset(bounce, "q1", "q2", xm, fm, fp)
    np.testing.assert_allclose(Pi, [[-1.0, 0.0], [-2.0 * g / zd, -1.0]], atol=1e-12)


def test_variational_reset_grazing(bounce):
    xm = np.array([0.0, 0.0])
    f = np.array([0.0, -9.81])
    with pytest.raises(GrazingError):
        variational_reset(bounce, "q1", "q2", xm, f, f)


def test_shape_and_name_checks(cart, bounce):
    with pytest.raises(UsageError):
        eval_dynamics(cart, 0.0, [0.0, 0.0, 0.0], [0.0])
    with pytest.raises(UsageError):
        eval_dynamics(cart, 0.0, [0.0, 0.0], [0.0, 1.0])
    with pytest.raises(UsageError):
        eval_dynamics(bounce, 0.0, [1.0, 0.0], [0.0], q="nowhere")
    with pytest.raises(UsageError):
        eval_guard(bounce, "q1", "q1", [1.0, 0.0])


def test_transition_names_are_checked(bounce):
    with pytest.raises(UsageError):
        HybridModel(2, 1, ("a",), *bounce._fns[:2], transitions=[Transition("a", "b")])
