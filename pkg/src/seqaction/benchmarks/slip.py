"""Spring-loaded inverted pendulum hopping over terrain.

State ``(x_m, x_m_dot, y_m, y_m_dot, z_m, z_m_dot, x_t, y_t)``: mass position
and velocity plus the horizontal toe position. Controls ``(u_tx, u_ty, u_s)``:
toe velocities act only in flight, leg thrust only in stance. The leg runs
from the toe's ground point ``(x_t, y_t, z_G(x_t))`` to the mass.

Parameters ``p = (m, k, l0, g, tp...)`` with the terrain vector ``tp`` last.
"""
import numpy as np

from .._jit import njit
from ..dynamics import HybridModel, Transition
from ..errors import NumericError
from ..objectives import StateTarget
from . import terrain as _terrain

FLIGHT, STANCE = 0, 1
LOCATIONS = ("flight", "stance")
TRANSITIONS = (Transition("flight", "stance", -1), Transition("stance", "flight", +1))


@njit
def leg(x, p):
    """Leg vector components and length ``l_s``."""
    zg = _terrain.height(x[6], p[4:])
    dx = x[0] - x[6]
    dy = x[2] - x[7]
    dz = x[4] - zg
    return dx, dy, dz, np.sqrt(dx * dx + dy * dy + dz * dz)


@njit
def _drift(q, t, x, p):
    if q == STANCE:
        dx, dy, dz, ls = leg(x, p)
        F = p[1] * (p[2] - ls) / (p[0] * ls)
        return np.array([x[1], F * dx, x[3], F * dy, x[5], F * dz - p[3], 0.0, 0.0])
    return np.array([x[1], 0.0, x[3], 0.0, x[5], -p[3], x[1], x[3]])


@njit
def _input_map(q, t, x, p):
    h = np.zeros((8, 3))
    if q == STANCE:
        dx, dy, dz, ls = leg(x, p)
        h[1, 2] = dx / (p[0] * ls)
        h[3, 2] = dy / (p[0] * ls)
        h[5, 2] = dz / (p[0] * ls)
    else:
        h[6, 0] = 1.0
        h[7, 1] = 1.0
    return h


@njit
def _guard(k, x, p):
    zg = _terrain.height(x[6], p[4:])
    dx, dy, dz, ls = leg(x, p)
    return x[4] - p[2] * dz / ls - zg


@njit
def _reset(k, x, p):
    return x.copy()


@njit
def _reset_jac(k, x, p):
    return np.eye(8)


def slip(terrain_params=None, m: float = 1.0, k: float = 100.0, l0: float = 1.0, g: float = 9.81) -> HybridModel:
    tp = _terrain.terrain("stairs") if terrain_params is None else np.asarray(terrain_params, dtype=float)
    return HybridModel(
        8, 3, LOCATIONS, _drift, _input_map, None, TRANSITIONS,
        _guard, None, _reset, _reset_jac, params=np.concatenate([[m, k, l0, g], tp]), name="slip",
    )


def leg_length(model: HybridModel, x) -> float:
    return float(leg(np.ascontiguousarray(x, dtype=float), model.params)[3])


def slip_location_dynamics(model: HybridModel, x, u, location) -> np.ndarray:
    """Flight or stance vector field; stance with a collapsed leg is a numeric error."""
    x = model._state(x)
    u = model._control(u)
    q = model.location_index(location)
    if q == STANCE and leg_length(model, x) < 1e-9:
        raise NumericError("leg length vanished in stance")
    return model.kernels.f(q, 0.0, x, u, model.params)


@njit
def _target(x, xd, tp):
    out = xd.copy()
    out[4] += _terrain.height(x[0], tp)
    return out


@njit
def _target_jac(x, xd, tp):
    J = np.zeros((x.shape[0], x.shape[0]))
    J[4, 0] = _terrain.slope(x[0], tp)
    return J


def terrain_following_target(terrain_params) -> StateTarget:
    """Desired height measured from the ground below the mass."""
    return StateTarget(_target, _target_jac, np.asarray(terrain_params, dtype=float))
