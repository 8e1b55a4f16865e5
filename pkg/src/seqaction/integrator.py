"""Fixed-step RK4 integration with guard localisation and trajectory storage."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .dynamics import GRAZING_TOL, HybridModel
from .errors import AmbiguousTransitionError, DivergenceError, GrazingError, UsageError, ZenoError

MAX_TRANSITIONS = 10
EVENT_TOL = 1e-10


class PiecewiseControl:
    """Piecewise-constant control signal ``u(t)``.

    Pieces are half-open intervals ``[a, b)``; where pieces overlap the one
    added last wins, and the signal is zero outside every piece.
    """

    def __init__(self, m: int, starts=(), ends=(), values=None):
        self.m = int(m)
        self.starts = np.ascontiguousarray(np.asarray(starts, dtype=float).reshape(-1))
        self.ends = np.ascontiguousarray(np.asarray(ends, dtype=float).reshape(-1))
        if values is None:
            values = np.zeros((0, self.m))
        self.values = np.ascontiguousarray(np.asarray(values, dtype=float).reshape(-1, self.m))
        if not (len(self.starts) == len(self.ends) == len(self.values)):
            raise UsageError("piece arrays must have equal length")

    @classmethod
    def zero(cls, m: int) -> "PiecewiseControl":
        return cls(m)

    @classmethod
    def constant(cls, value, t0: float, tf: float) -> "PiecewiseControl":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(value.size, [t0], [tf], value[None, :])

    @classmethod
    def from_function(cls, fn: Callable, m: int, t0: float, tf: float, dt: float) -> "PiecewiseControl":
        """Sample ``fn`` at step midpoints of the grid ``t0, t0 + dt, ..., tf``."""
        grid = _grid(t0, tf, dt)
        mids = 0.5 * (grid[:-1] + grid[1:])
        vals = np.array([np.atleast_1d(fn(t)) for t in mids], dtype=float).reshape(-1, m)
        return cls(m, grid[:-1], grid[1:], vals)

    def add(self, a: float, b: float, value) -> "PiecewiseControl":
        value = np.atleast_1d(np.asarray(value, dtype=float)).reshape(1, self.m)
        return PiecewiseControl(
            self.m,
            np.append(self.starts, a),
            np.append(self.ends, b),
            np.vstack([self.values, value]),
        )

    def after(self, t: float) -> "PiecewiseControl":
        """Drop pieces that end at or before ``t``."""
        keep = self.ends > t
        return PiecewiseControl(self.m, self.starts[keep], self.ends[keep], self.values[keep])

    def __call__(self, t: float) -> np.ndarray:
        return _kernels.control_at(float(t), self.starts, self.ends, self.values)

    def __len__(self) -> int:
        return len(self.starts)

    @property
    def arrays(self):
        return self.starts, self.ends, self.values


def as_control(u_fn, m: int, t0: float, tf: float, dt: float) -> PiecewiseControl:
    if u_fn is None:
        return PiecewiseControl.zero(m)
    if isinstance(u_fn, PiecewiseControl):
        return u_fn
    if callable(u_fn):
        return PiecewiseControl.from_function(u_fn, m, t0, tf, dt)
    return PiecewiseControl.constant(u_fn, t0, tf)


def _grid(t0, tf, dt):
    n = int(np.ceil((tf - t0) / dt - 1e-9))
    g = t0 + dt * np.arange(n + 1)
    g[-1] = tf
    return g


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States and applied controls on a time grid.

    Hybrid runs store two nodes at each transition time (pre- and post-reset);
    ``event_nodes`` holds the index of each pre-reset node.
    """

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    locations: np.ndarray = None
    event_nodes: np.ndarray = None
    event_transitions: np.ndarray = None
    model: HybridModel | None = field(default=None, repr=False)
    control: PiecewiseControl | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.times)
        if self.locations is None:
            object.__setattr__(self, "locations", np.zeros(n, dtype=np.int64))
        if self.event_nodes is None:
            object.__setattr__(self, "event_nodes", np.zeros(0, dtype=np.int64))
        if self.event_transitions is None:
            object.__setattr__(self, "event_transitions", np.zeros(0, dtype=np.int64))

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def tf(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def transition_times(self) -> np.ndarray:
        return self.times[self.event_nodes]

    def __len__(self) -> int:
        return len(self.times)


class HybridTrajectory(Trajectory):
    """Trajectory of a hybrid model, viewable as per-location segments."""

    @property
    def location_sequence(self) -> tuple:
        names = self.model.locations if self.model is not None else None
        seq = [int(self.locations[0])] + [int(self.locations[i + 1]) for i in self.event_nodes]
        return tuple(names[q] for q in seq) if names else tuple(seq)

    @property
    def segments(self) -> list:
        """``[(location, Trajectory), ...]`` split at each transition."""
        bounds = [0] + [int(i) + 1 for i in self.event_nodes] + [len(self.times)]
        names = self.location_sequence
        out = []
        for s, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
            seg = Trajectory(self.times[a:b], self.states[a:b], self.controls[a:b], model=self.model, control=self.control)
            out.append((names[s], seg))
        return out


_FAILURES = {
    _kernels.DIVERGED: lambda t: DivergenceError(f"state became non-finite near t={t:.6g}", time=t),
    _kernels.ZENO: lambda t: ZenoError(f"transition limit exceeded at t={t:.6g}"),
    _kernels.AMBIGUOUS: lambda t: AmbiguousTransitionError(f"several guards crossed in the step ending t={t:.6g}"),
    _kernels.GRAZING: lambda t: GrazingError(f"grazing guard crossing at t={t:.6g}"),
}


def simulate(
    model: HybridModel,
    x0,
    control: PiecewiseControl,
    t0: float,
    tf: float,
    dt: float,
    q0=0,
    max_transitions: int = MAX_TRANSITIONS,
    event_tol: float | None = None,
) -> HybridTrajectory:
    """Core integration shared by the smooth and hybrid entry points."""
    if not dt > 0:
        raise UsageError("dt must be positive")
    if tf < t0:
        raise UsageError("tf must not precede t0")
    x0 = model._state(x0)
    qi = model.location_index(q0)
    if event_tol is None:
        event_tol = EVENT_TOL * max(tf - t0, 1e-12)
    pa, pb, pu = control.arrays
    T, X, Q, ev, ek, status, t_fail = model.kernels.simulate(
        qi, float(t0), x0, float(tf), float(dt), pa, pb, pu, model.params,
        model.tr_from, model.tr_to, model.tr_dir, int(max_transitions), float(event_tol), GRAZING_TOL,
    )
    if status != _kernels.OK:
        raise _FAILURES[status](t_fail)
    U = _kernels.controls_at(T, pa, pb, pu)
    return HybridTrajectory(T, X, U, Q, ev, ek, model=model, control=control)


def integrate_smooth(model: HybridModel, x0, u_fn, span, dt: float) -> Trajectory:
    """RK4 on ``[t0, tf]`` with a uniform step (the last one may be short)."""
    t0, tf = map(float, span)
    if not tf > t0:
        raise UsageError("span must satisfy tf > t0")
    control = as_control(u_fn, model.m, t0, tf, dt)
    traj = simulate(model, x0, control, t0, tf, dt)
    return Trajectory(traj.times, traj.states, traj.controls, model=model, control=control)


def integrate_hybrid(model: HybridModel, q0, x0, u_fn, span, dt: float, max_transitions: int = MAX_TRANSITIONS) -> HybridTrajectory:
    """RK4 with guard checks after every step, bisection to the event time, and resets."""
    t0, tf = map(float, span)
    if not tf > t0:
        raise UsageError("span must satisfy tf > t0")
    control = as_control(u_fn, model.m, t0, tf, dt)
    return simulate(model, x0, control, t0, tf, dt, q0=q0, max_transitions=max_transitions)


def node_index(traj: Trajectory, t: float, side: str = "+") -> int | None:
    """Index of the node at exactly ``t`` (post-reset node for ``side='+'``), else None."""
    T = traj.times
    if side == "+":
        j = int(np.searchsorted(T, t, side="right")) - 1
    else:
        j = int(np.searchsorted(T, t, side="left"))
    if 0 <= j < len(T) and T[j] == t:
        return j
    return None


def sample_state(traj: Trajectory, t: float, side: str = "+") -> np.ndarray:
    """Linear interpolation between the bracketing nodes; never interpolates across a reset."""
    T = traj.times
    if side not in ("+", "-"):
        raise UsageError("side must be '+' or '-'")
    if t < T[0] or t > T[-1]:
        raise UsageError(f"t={t} outside [{T[0]}, {T[-1]}]")
    j = node_index(traj, t, side)
    if j is not None:
        return traj.states[j].copy()
    j = int(np.searchsorted(T, t, side="right")) - 1
    w = (t - T[j]) / (T[j + 1] - T[j])
    return (1.0 - w) * traj.states[j] + w * traj.states[j + 1]


def detect_crossing(guard_fn: Callable[[float], float], t_lo: float, t_hi: float, tol: float = 1e-10) -> float:
    """Bisect a sign change of ``guard_fn`` on ``[t_lo, t_hi]``; returns the right end of the final bracket."""
    g_lo = guard_fn(t_lo)
    g_hi = guard_fn(t_hi)
    if np.sign(g_lo) == np.sign(g_hi) and g_hi != 0.0:
        raise UsageError("guard has the same sign at both ends of the bracket")
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        g_mid = guard_fn(mid)
        if g_mid == 0.0 or np.sign(g_mid) != np.sign(g_lo):
            t_hi = mid
        else:
            t_lo = mid
    return t_hi
