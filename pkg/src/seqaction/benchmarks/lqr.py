"""Linear state feedback for holding an equilibrium, with a switch condition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def wrap(a):
    return (np.asarray(a) + np.pi) % (2 * np.pi) - np.pi


def lqr_stabilize(K, x, x_eq, bounds, angle_indices=()) -> np.ndarray:
    """``u = -K (x - x_eq)`` with angle errors wrapped, clamped to ``bounds = (u_min, u_max)``."""
    e = np.asarray(x, dtype=float) - np.asarray(x_eq, dtype=float)
    for i in angle_indices:
        e[i] = wrap(e[i])
    u = -np.atleast_2d(K) @ e
    return np.clip(u, bounds[0], bounds[1])


@dataclass
class LqrStabilizer:
    """Supervisor that takes over once every entry of ``switch_indices`` is within ``switch_radius``.

    Used by ``run_closed_loop``: ``ready(t, x, q)`` tests the switch, calling
    the object returns the feedback control.
    """

    K: np.ndarray
    x_eq: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    switch_indices: tuple = ()
    switch_radius: float = 0.0
    angle_indices: tuple = ()

    def __post_init__(self):
        self.K = np.atleast_2d(np.asarray(self.K, dtype=float))
        self.x_eq = np.asarray(self.x_eq, dtype=float)
        self.u_min = np.atleast_1d(np.asarray(self.u_min, dtype=float))
        self.u_max = np.atleast_1d(np.asarray(self.u_max, dtype=float))

    def error(self, x) -> np.ndarray:
        e = np.asarray(x, dtype=float) - self.x_eq
        for i in self.angle_indices:
            e[i] = wrap(e[i])
        return e

    def ready(self, t, x, q=0) -> bool:
        e = self.error(x)
        return bool(np.all(np.abs(e[list(self.switch_indices)]) <= self.switch_radius))

    def __call__(self, t, x, q=0) -> np.ndarray:
        return lqr_stabilize(self.K, x, self.x_eq, (self.u_min, self.u_max), self.angle_indices)


def run_with_switch(model, cost, params, x0, duration, stabilizer: LqrStabilizer, **kw):
    """Closed loop that hands over to ``stabilizer`` when its switch condition first holds."""
    from ..sac_core import run_closed_loop

    return run_closed_loop(model, cost, params, x0, duration, supervisor=stabilizer, **kw)
