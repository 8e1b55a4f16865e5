"""Pendulum on an acceleration-controlled cart.

State ``(theta, theta_dot, x_c, x_c_dot)`` with ``theta = 0`` upright; the
reduced model keeps only the first two states. Parameters ``p = (g, h)``.
"""
import numpy as np

from .._jit import njit
from ..dynamics import SystemModel

G = 9.81
LENGTH = 2.0


@njit
def _drift(t, x, p):
    return np.array([x[1], p[0] / p[1] * np.sin(x[0]), x[3], 0.0])


@njit
def _input_map(t, x, p):
    h = np.zeros((4, 1))
    h[1, 0] = np.cos(x[0]) / p[1]
    h[3, 0] = 1.0
    return h


@njit
def _jac(t, x, u, p):
    A = np.zeros((4, 4))
    A[0, 1] = 1.0
    A[1, 0] = (p[0] * np.cos(x[0]) - u[0] * np.sin(x[0])) / p[1]
    A[2, 3] = 1.0
    return A


@njit
def _drift_reduced(t, x, p):
    return np.array([x[1], p[0] / p[1] * np.sin(x[0])])


@njit
def _input_map_reduced(t, x, p):
    h = np.zeros((2, 1))
    h[1, 0] = np.cos(x[0]) / p[1]
    return h


@njit
def _jac_reduced(t, x, u, p):
    A = np.zeros((2, 2))
    A[0, 1] = 1.0
    A[1, 0] = (p[0] * np.cos(x[0]) - u[0] * np.sin(x[0])) / p[1]
    return A


def cart_pendulum(g: float = G, h: float = LENGTH, reduced: bool = False) -> SystemModel:
    if reduced:
        return SystemModel(2, 1, _drift_reduced, _input_map_reduced, _jac_reduced, params=[g, h], name="cart_pendulum_reduced")
    return SystemModel(4, 1, _drift, _input_map, _jac, params=[g, h], name="cart_pendulum")


def pendulum_energy(x, g: float = G, h: float = LENGTH) -> np.ndarray:
    """Energy per unit mass-length squared of the passive pendulum (cart unforced)."""
    x = np.atleast_2d(x)
    return 0.5 * x[:, 1] ** 2 + g / h * np.cos(x[:, 0])


def linearization(g: float = G, h: float = LENGTH):
    """``(A, B)`` of the reduced model at the upright equilibrium."""
    return np.array([[0.0, 1.0], [g / h, 0.0]]), np.array([[0.0], [1.0 / h]])
