"""Point masses bouncing elastically on a flat floor at height zero.

``bounce_1d``: state ``(z, z_dot)``, control is a vertical acceleration.
``bouncing_ball``: state ``(x_b, z_b, x_b_dot, z_b_dot)``, controls ``(a_x, a_z)``.
Both alternate between two locations at each impact; the reset reflects the
vertical velocity.
"""
import numpy as np

from .._jit import njit
from ..dynamics import HybridModel, Transition

G = 9.81
LOCATIONS = ("q1", "q2")
TRANSITIONS = (Transition("q1", "q2", -1), Transition("q2", "q1", -1))


@njit
def _drift_1d(q, t, x, p):
    return np.array([x[1], -p[0]])


@njit
def _input_1d(q, t, x, p):
    return np.array([[0.0], [1.0]])


@njit
def _jac_1d(q, t, x, u, p):
    return np.array([[0.0, 1.0], [0.0, 0.0]])


@njit
def _guard_1d(k, x, p):
    return x[0]


@njit
def _guard_grad_1d(k, x, p):
    return np.array([1.0, 0.0])


@njit
def _reset_1d(k, x, p):
    return np.array([x[0], -x[1]])


@njit
def _reset_jac_1d(k, x, p):
    return np.array([[1.0, 0.0], [0.0, -1.0]])


@njit
def _drift_ball(q, t, x, p):
    return np.array([x[2], x[3], 0.0, -p[0]])


@njit
def _input_ball(q, t, x, p):
    h = np.zeros((4, 2))
    h[2, 0] = 1.0
    h[3, 1] = 1.0
    return h


@njit
def _jac_ball(q, t, x, u, p):
    A = np.zeros((4, 4))
    A[0, 2] = 1.0
    A[1, 3] = 1.0
    return A


@njit
def _guard_ball(k, x, p):
    return x[1]


@njit
def _guard_grad_ball(k, x, p):
    g = np.zeros(4)
    g[1] = 1.0
    return g


@njit
def _reset_ball(k, x, p):
    return np.array([x[0], x[1], x[2], -x[3]])


@njit
def _reset_jac_ball(k, x, p):
    D = np.eye(4)
    D[3, 3] = -1.0
    return D


def bounce_1d(g: float = G) -> HybridModel:
    return HybridModel(
        2, 1, LOCATIONS, _drift_1d, _input_1d, _jac_1d, TRANSITIONS,
        _guard_1d, _guard_grad_1d, _reset_1d, _reset_jac_1d, params=[g], name="bounce_1d",
    )


def bouncing_ball(g: float = G) -> HybridModel:
    return HybridModel(
        4, 2, LOCATIONS, _drift_ball, _input_ball, _jac_ball, TRANSITIONS,
        _guard_ball, _guard_grad_ball, _reset_ball, _reset_jac_ball, params=[g], name="bouncing_ball",
    )


def apex_heights(times, z, zdot):
    """``(t, z)`` at every interior local maximum of height (sign change of ``z_dot`` from + to -)."""
    times = np.asarray(times)
    z = np.asarray(z)
    zdot = np.asarray(zdot)
    idx = np.flatnonzero((zdot[:-1] > 0) & (zdot[1:] <= 0) & (np.diff(times) > 0))
    out = []
    for i in idx:
        # vertex of the parabola through the two bracketing samples
        t0, t1 = times[i], times[i + 1]
        a = (zdot[i + 1] - zdot[i]) / (t1 - t0)
        tp = t0 - zdot[i] / a if a != 0 else t0
        out.append((tp, z[i] + zdot[i] * (tp - t0) + 0.5 * a * (tp - t0) ** 2))
    return np.array(out).reshape(-1, 2)
