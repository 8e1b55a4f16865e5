"""Pendubot and acrobot.

Both links are described by absolute angles measured from the upright
vertical, so the inverted equilibrium is the origin of
``x = (theta1, theta1_dot, theta2, theta2_dot)`` and the hanging one is
``(pi, 0, pi, 0)``. The motor sits at the shoulder (pendubot) or the elbow
(acrobot); an elbow torque acts on the relative angle ``theta2 - theta1``.

Parameters ``p = (m1, m2, l1, l2, lc1, lc2, I1, I2, g, joint)``.
"""
import numpy as np

from .._jit import njit
from ..dynamics import SystemModel

PENDUBOT = dict(m1=1.0367, m2=0.5549, l1=0.1508, l2=0.2667, lc1=0.1206, lc2=0.1135, I1=0.0031, I2=0.0035)
ACROBOT = dict(m1=1.0, m2=1.0, l1=1.0, l2=2.0, lc1=0.5, lc2=1.0, I1=0.083, I2=0.33)
PARAM_ORDER = ("m1", "m2", "l1", "l2", "lc1", "lc2", "I1", "I2")
G = 9.81


@njit
def _mass_matrix(x, p):
    m2, l1, lc1, lc2 = p[1], p[2], p[4], p[5]
    c = m2 * l1 * lc2 * np.cos(x[0] - x[2])
    M = np.empty((2, 2))
    M[0, 0] = p[0] * lc1 ** 2 + p[6] + m2 * l1 ** 2
    M[0, 1] = c
    M[1, 0] = c
    M[1, 1] = m2 * lc2 ** 2 + p[7]
    return M


@njit
def _bias(x, p):
    """Coriolis and gravity terms moved to the right-hand side."""
    m1, m2, l1, lc1, lc2, g = p[0], p[1], p[2], p[4], p[5], p[8]
    s = m2 * l1 * lc2 * np.sin(x[0] - x[2])
    b1 = -s * x[3] ** 2 + (m1 * lc1 + m2 * l1) * g * np.sin(x[0])
    b2 = s * x[1] ** 2 + m2 * lc2 * g * np.sin(x[2])
    return b1, b2


@njit
def _solve2(M, r1, r2):
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return (M[1, 1] * r1 - M[0, 1] * r2) / det, (M[0, 0] * r2 - M[1, 0] * r1) / det


@njit
def _drift(t, x, p):
    M = _mass_matrix(x, p)
    b1, b2 = _bias(x, p)
    a1, a2 = _solve2(M, b1, b2)
    return np.array([x[1], a1, x[3], a2])


@njit
def _input_map(t, x, p):
    M = _mass_matrix(x, p)
    if p[9] == 1.0:
        a1, a2 = _solve2(M, 1.0, 0.0)
    else:
        a1, a2 = _solve2(M, -1.0, 1.0)
    h = np.zeros((4, 1))
    h[1, 0] = a1
    h[3, 0] = a2
    return h


def _params(values: dict, joint: int, g: float):
    return [values[k] for k in PARAM_ORDER] + [g, float(joint)]


def two_link(kind: str = "pendubot", g: float = G, **overrides) -> SystemModel:
    """Pendubot (``kind='pendubot'``, shoulder motor) or acrobot (elbow motor)."""
    base = dict(PENDUBOT if kind == "pendubot" else ACROBOT)
    base.update(overrides)
    joint = 1 if kind == "pendubot" else 2
    return SystemModel(4, 1, _drift, _input_map, None, params=_params(base, joint, g), name=kind)


def two_link_dynamics(params: dict, x, torque: float, actuated_joint: int, g: float = G) -> np.ndarray:
    """State derivative for a parameter dict, torque and actuated joint (1 or 2)."""
    p = np.array(_params(params, actuated_joint, g))
    x = np.ascontiguousarray(x, dtype=float)
    return _drift(0.0, x, p) + _input_map(0.0, x, p)[:, 0] * torque


def mass_matrix(params: dict, x) -> np.ndarray:
    p = np.array(_params(params, 1, G))
    return _mass_matrix(np.ascontiguousarray(x, dtype=float), p)


def energy(params: dict, x, g: float = G) -> np.ndarray:
    """Kinetic plus potential energy (zero potential at the shoulder height)."""
    x = np.atleast_2d(x)
    m1, m2, l1, lc1, lc2 = params["m1"], params["m2"], params["l1"], params["lc1"], params["lc2"]
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        M = mass_matrix(params, xi)
        qd = np.array([xi[1], xi[3]])
        V = m1 * g * lc1 * np.cos(xi[0]) + m2 * g * (l1 * np.cos(xi[0]) + lc2 * np.cos(xi[2]))
        out[i] = 0.5 * qd @ M @ qd + V
    return out
