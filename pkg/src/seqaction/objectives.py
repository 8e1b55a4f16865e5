"""Tracking costs, their gradients, and the fixed-horizon comparison metric.

A cost is four jitted functions over a parameter tuple ``cp``::

    lcost(t, x, cp) -> float     running cost l
    lgrad(t, x, cp) -> (n,)      gradient of l
    mcost(x, cp)    -> float     terminal cost m
    mgrad(x, cp)    -> (n,)      gradient of m

``QuadraticTrackingCost`` builds these from ``Q``, ``P1`` and a target, with
optional hooks for state-dependent weights and state-dependent targets.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from ._jit import njit
from .errors import NumericError, UsageError


@njit
def wrap_angle(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


_COST_KERNELS: dict = {}


class Cost:
    """Cost from user-supplied jitted functions; see the module docstring for signatures."""

    def __init__(self, lcost: Callable, lgrad: Callable, mcost: Callable, mgrad: Callable, params: tuple):
        self._fns = (lcost, lgrad, mcost, mgrad)
        self.params = params

    @property
    def kernels(self):
        k = _COST_KERNELS.get(self._fns)
        if k is None:
            k = _COST_KERNELS[self._fns] = _kernels.build_cost_kernels(*self._fns)
        return k

    def running(self, t: float, x) -> float:
        return float(self.kernels.l(float(t), np.ascontiguousarray(x, dtype=float), self.params))

    def terminal(self, x) -> float:
        return float(self.kernels.m(np.ascontiguousarray(x, dtype=float), self.params))


# -- hooks -------------------------------------------------------------------


@njit
def _const_weight(x, Q, wp):
    return Q


@njit
def _const_weight_grad(x, e, Q, wp):
    return np.zeros(x.shape[0])


@njit
def _const_target(x, xd, tp):
    return xd


@njit
def _const_target_jac(x, xd, tp):
    n = x.shape[0]
    return np.zeros((n, n))


@dataclass(frozen=True)
class StateWeight:
    """State-dependent running weight ``Q(x)``.

    ``weight(x, Q, wp) -> (n, n)`` and ``weight_grad(x, e, Q, wp) -> (n,)``, the
    latter being the gradient of ``0.5 e' Q(x) e`` with ``e`` held fixed.
    """

    weight: Callable
    weight_grad: Callable
    params: np.ndarray = field(default_factory=lambda: np.zeros(1))


@dataclass(frozen=True)
class StateTarget:
    """State-dependent target ``x_d(x)`` with Jacobian ``target_jac(x, xd, tp) -> (n, n)``."""

    target: Callable
    target_jac: Callable
    params: np.ndarray = field(default_factory=lambda: np.zeros(1))


@njit
def _barrier_weight(x, Q, wp):
    W = Q.copy()
    i = int(wp[0])
    W[i, i] += (x[i] / wp[1]) ** wp[2]
    return W


@njit
def _barrier_weight_grad(x, e, Q, wp):
    g = np.zeros(x.shape[0])
    i = int(wp[0])
    s = wp[1]
    pw = wp[2]
    g[i] = 0.5 * e[i] ** 2 * pw * (x[i] / s) ** (pw - 1.0) / s
    return g


def barrier_weight(index: int, scale: float, power: float = 8.0) -> StateWeight:
    """Adds ``(x_i / scale) ** power`` to the diagonal weight of state ``i``."""
    return StateWeight(_barrier_weight, _barrier_weight_grad, np.array([index, scale, power], dtype=float))


_KERNEL_CACHE: dict = {}


def _quadratic_fns(weight, weight_grad, target, target_jac):
    key = (weight, weight_grad, target, target_jac)
    if key in _KERNEL_CACHE:
        return _KERNEL_CACHE[key]

    @njit
    def err(x, cp):
        xd = target(x, cp[2], cp[5])
        wrap = cp[3]
        e = x - xd
        for i in range(e.shape[0]):
            if wrap[i] != 0.0:
                e[i] = wrap_angle(e[i])
        return e

    @njit
    def quad(W, e):
        s = 0.0
        for i in range(e.shape[0]):
            for j in range(e.shape[0]):
                s += e[i] * W[i, j] * e[j]
        return 0.5 * s

    @njit
    def lcost(t, x, cp):
        e = err(x, cp)
        return quad(weight(x, cp[0], cp[4]), e)

    @njit
    def lgrad(t, x, cp):
        e = err(x, cp)
        v = _kernels.matvec(weight(x, cp[0], cp[4]), e)
        g = v - _kernels.tmatvec(target_jac(x, cp[2], cp[5]), v)
        return g + weight_grad(x, e, cp[0], cp[4])

    @njit
    def mcost(x, cp):
        return quad(cp[1], err(x, cp))

    @njit
    def mgrad(x, cp):
        v = _kernels.matvec(cp[1], err(x, cp))
        return v - _kernels.tmatvec(target_jac(x, cp[2], cp[5]), v)

    fns = (lcost, lgrad, mcost, mgrad)
    _KERNEL_CACHE[key] = fns
    return fns


class QuadraticTrackingCost(Cost):
    """``l = 0.5 e' Q(x) e`` and ``m = 0.5 e' P1 e`` with ``e = x - x_d``.

    Components listed in ``angle_indices`` are wrapped to ``[-pi, pi)`` after
    subtraction. ``weight`` and ``target`` hooks make ``Q`` or ``x_d``
    state dependent; their derivatives enter the gradients.
    """

    def __init__(
        self,
        Q,
        P1=None,
        x_d=None,
        angle_indices: Sequence[int] = (),
        weight: StateWeight | None = None,
        target: StateTarget | None = None,
    ):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        n = Q.shape[0]
        P1 = np.zeros((n, n)) if P1 is None else np.atleast_2d(np.asarray(P1, dtype=float))
        x_d = np.zeros(n) if x_d is None else np.asarray(x_d, dtype=float).reshape(n)
        for M, name in ((Q, "Q"), (P1, "P1")):
            if M.shape != (n, n):
                raise UsageError(f"{name} must be {n}x{n}")
            if not np.allclose(M, M.T):
                raise UsageError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(M).min() < -1e-12 * max(1.0, np.abs(M).max()):
                raise UsageError(f"{name} must be positive semidefinite")
        wrap = np.zeros(n)
        for i in angle_indices:
            wrap[int(i)] = 1.0
        self.n = n
        self.Q = np.ascontiguousarray(Q)
        self.P1 = np.ascontiguousarray(P1)
        self.x_d = np.ascontiguousarray(x_d)
        self.angle_indices = tuple(int(i) for i in angle_indices)
        self.weight = weight
        self.target = target
        w = weight or StateWeight(_const_weight, _const_weight_grad)
        tg = target or StateTarget(_const_target, _const_target_jac)
        params = (
            self.Q,
            self.P1,
            self.x_d,
            wrap,
            np.ascontiguousarray(w.params, dtype=float),
            np.ascontiguousarray(tg.params, dtype=float),
        )
        super().__init__(*_quadratic_fns(w.weight, w.weight_grad, tg.target, tg.target_jac), params)

    def replace(self, **changes) -> "QuadraticTrackingCost":
        kw = dict(Q=self.Q, P1=self.P1, x_d=self.x_d, angle_indices=self.angle_indices, weight=self.weight, target=self.target)
        kw.update(changes)
        return QuadraticTrackingCost(**kw)


def _checked(v, what):
    if not np.all(np.isfinite(v)):
        raise NumericError(f"non-finite {what}")
    return v


def eval_cost(cost: Cost, traj) -> float:
    """Trapezoidal integral of ``l`` over the trajectory nodes plus ``m`` at the final state."""
    J = cost.kernels.total(traj.times, traj.states, cost.params)
    return float(_checked(J, "cost"))


def running_cost_series(cost: Cost, traj) -> np.ndarray:
    """Cumulative trapezoidal running cost at every node (no terminal term)."""
    l = cost.kernels.running(traj.times, traj.states, cost.params)
    inc = 0.5 * np.diff(traj.times) * (l[1:] + l[:-1])
    return np.concatenate([[0.0], np.cumsum(inc)])


def incremental_gradient(cost: Cost, t: float, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=float)
    return _checked(cost.kernels.dl(float(t), x, cost.params), "running-cost gradient")


def terminal_gradient(cost: Cost, x_f) -> np.ndarray:
    x_f = np.ascontiguousarray(x_f, dtype=float)
    return _checked(cost.kernels.dm(x_f, cost.params), "terminal-cost gradient")


def control_energy(control, R, t0: float, t1: float) -> float:
    """Exact ``0.5 * int u' R u dt`` of a piecewise-constant control over ``[t0, t1]``."""
    pa, pb, pu = control.arrays
    bp = _kernels.breakpoints(float(t0), float(t1), pa, pb)
    R = np.atleast_2d(R)
    J = 0.0
    for a, b in zip(bp[:-1], bp[1:]):
        u = _kernels.control_at(0.5 * (a + b), pa, pb, pu)
        J += 0.5 * (b - a) * float(u @ R @ u)
    return J


def eval_comparison_metric(traj, Q, R, T_opt: float, x_d=None, angle_indices: Sequence[int] = (), exact_control: bool = True) -> float:
    """``0.5 * int_0^T_opt (|x - x_d|_Q^2 + |u|_R^2) dt`` along a closed-loop trajectory.

    The state term uses the trapezoid rule on the stored nodes. The control
    term is integrated exactly from the piecewise-constant signal when the
    trajectory carries it (``exact_control``), otherwise by trapezoid on the
    stored controls.
    """
    T = traj.times
    t_end = T[0] + T_opt
    if T[-1] < t_end - 1e-9:
        raise UsageError(f"trajectory covers {T[-1] - T[0]:.4g} s, shorter than T_opt={T_opt}")
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = Q.shape[0]
    keep = T <= t_end + 1e-12
    t = T[keep]
    X = traj.states[keep][:, :n]
    e = X - (np.zeros(n) if x_d is None else np.asarray(x_d, dtype=float))
    for i in angle_indices:
        e[:, i] = (e[:, i] + np.pi) % (2 * np.pi) - np.pi
    ls = 0.5 * np.einsum("ij,jk,ik->i", e, Q, e)
    J = float(np.sum(0.5 * np.diff(t) * (ls[1:] + ls[:-1])))
    if exact_control and getattr(traj, "control", None) is not None:
        J += control_energy(traj.control, R, t[0], t_end)
    else:
        U = traj.controls[keep]
        lu = 0.5 * np.einsum("ij,jk,ik->i", U, R, U)
        J += float(np.sum(0.5 * np.diff(t) * (lu[1:] + lu[:-1])))
    return _checked(J, "comparison metric")
