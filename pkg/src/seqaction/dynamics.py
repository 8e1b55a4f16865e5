"""Control-affine and hybrid impulsive system models.

A model is a bundle of jitted functions sharing one parameter vector ``p``::

    drift(q, t, x, p)       -> (n,)     g_q(t, x)
    input_map(q, t, x, p)   -> (n, m)   h_q(t, x)
    jacobian(q, t, x, u, p) -> (n, n)   D_x f  (optional, central differences otherwise)
    guard(k, x, p)          -> float    Phi for transition k
    guard_grad(k, x, p)     -> (n,)     (optional)
    reset(k, x, p)          -> (n,)     Omega for transition k
    reset_jac(k, x, p)      -> (n, n)   (optional)

``q`` is a location index and ``k`` indexes the transition table. A smooth
system is a hybrid model with a single location and no transitions, so every
code path downstream is shared.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from ._jit import njit
from .errors import GrazingError, NumericError, UsageError

GRAZING_TOL = 1e-8

# compiled kernels are shared by every model built from the same functions
_MODEL_KERNELS: dict = {}


@njit
def _no_guard(k, x, p):
    return 1.0


@njit
def _no_guard_grad(k, x, p):
    return np.zeros(x.shape[0])


@njit
def _identity_reset(k, x, p):
    return x.copy()


@njit
def _identity_reset_jac(k, x, p):
    return np.eye(x.shape[0])


_LIFTED: dict = {}


def _lift_drift(fn):
    if fn in _LIFTED:
        return _LIFTED[fn]

    @njit
    def drift(q, t, x, p):
        return fn(t, x, p)

    _LIFTED[fn] = drift
    return drift


def _lift_jac(fn):
    if fn is None:
        return None
    if fn in _LIFTED:
        return _LIFTED[fn]

    @njit
    def jac(q, t, x, u, p):
        return fn(t, x, u, p)

    _LIFTED[fn] = jac
    return jac


@dataclass(frozen=True)
class Transition:
    """One row of the transition table: ``source -> target`` when the guard crosses zero.

    ``direction`` is -1 for a guard falling through zero, +1 for rising, 0 for either.
    """

    source: str
    target: str
    direction: int = -1


class HybridModel:
    """Hybrid impulsive system with control-affine flows in every location.

    Args:
        n: state dimension (shared by all locations).
        m: control dimension.
        locations: location names; index order matches ``q`` in the jitted functions.
        drift, input_map, jacobian: per-location flow functions, see module docstring.
        transitions: transition table; index order matches ``k``.
        guard, guard_grad, reset, reset_jac: per-transition functions.
        params: parameter vector passed to every function.
        name: label used in reports.
    """

    def __init__(
        self,
        n: int,
        m: int,
        locations: Sequence[str],
        drift: Callable,
        input_map: Callable,
        jacobian: Callable | None = None,
        transitions: Sequence[Transition] = (),
        guard: Callable = _no_guard,
        guard_grad: Callable | None = None,
        reset: Callable = _identity_reset,
        reset_jac: Callable | None = None,
        params=(),
        name: str = "model",
    ):
        self.n = int(n)
        self.m = int(m)
        self.locations = tuple(locations)
        if not self.locations:
            raise UsageError("a model needs at least one location")
        self.transitions = tuple(transitions)
        for tr in self.transitions:
            if tr.source not in self.locations or tr.target not in self.locations:
                raise UsageError(f"transition {tr.source}->{tr.target} uses an unknown location")
        self.params = np.ascontiguousarray(np.atleast_1d(np.asarray(params, dtype=float)))
        if self.params.size == 0:
            self.params = np.zeros(1)
        self.name = name
        self._fns = (drift, input_map, jacobian, guard, guard_grad, reset, reset_jac)
        self.tr_from = np.array([self.locations.index(t.source) for t in self.transitions], dtype=np.int64)
        self.tr_to = np.array([self.locations.index(t.target) for t in self.transitions], dtype=np.int64)
        self.tr_dir = np.array([t.direction for t in self.transitions], dtype=np.int64)

    @property
    def kernels(self):
        k = _MODEL_KERNELS.get(self._fns)
        if k is None:
            k = _MODEL_KERNELS[self._fns] = _kernels.build_model_kernels(*self._fns)
        return k

    @property
    def is_hybrid(self) -> bool:
        return bool(self.transitions)

    def location_index(self, q) -> int:
        if isinstance(q, (int, np.integer)):
            if not 0 <= q < len(self.locations):
                raise UsageError(f"location index {q} out of range")
            return int(q)
        try:
            return self.locations.index(q)
        except ValueError:
            raise UsageError(f"unknown location {q!r}") from None

    def transition_index(self, q, q_next) -> int:
        a = self.location_index(q)
        b = self.location_index(q_next)
        for k in range(len(self.transitions)):
            if self.tr_from[k] == a and self.tr_to[k] == b:
                return k
        raise UsageError(f"no transition declared from {self.locations[a]} to {self.locations[b]}")

    def with_params(self, params) -> "HybridModel":
        """Same structure (and compiled kernels) with a different parameter vector."""
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.params = np.ascontiguousarray(np.atleast_1d(np.asarray(params, dtype=float)))
        return clone

    # vector checks shared by the public evaluators
    def _state(self, x) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(x, dtype=float))
        if x.shape != (self.n,):
            raise UsageError(f"state must have shape ({self.n},), got {x.shape}")
        return x

    def _control(self, u) -> np.ndarray:
        u = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=float)))
        if u.shape != (self.m,):
            raise UsageError(f"control must have shape ({self.m},), got {u.shape}")
        return u


class SystemModel(HybridModel):
    """Smooth control-affine system ``x' = g(t, x) + h(t, x) u``.

    The flow functions take ``(t, x, p)`` (and ``(t, x, u, p)`` for the Jacobian);
    they are lifted to the single-location hybrid form internally.
    """

    def __init__(self, n, m, drift, input_map, jacobian=None, params=(), name="model"):
        super().__init__(
            n,
            m,
            ("q0",),
            _lift_drift(drift),
            _lift_drift(input_map),
            _lift_jac(jacobian),
            params=params,
            name=name,
        )


def _finite(v, what):
    if not np.all(np.isfinite(v)):
        raise NumericError(f"non-finite {what}")
    return v


def eval_dynamics(model: HybridModel, t: float, x, u, q=0) -> np.ndarray:
    """``g(t, x) + h(t, x) u`` in location ``q``."""
    x = model._state(x)
    u = model._control(u)
    qi = model.location_index(q)
    return _finite(model.kernels.f(qi, float(t), x, u, model.params), "dynamics")


def eval_drift(model: HybridModel, t: float, x, q=0) -> np.ndarray:
    x = model._state(x)
    return _finite(model.kernels.drift(model.location_index(q), float(t), x, model.params), "drift")


def eval_input_map(model: HybridModel, t: float, x, q=0) -> np.ndarray:
    x = model._state(x)
    return _finite(model.kernels.input_map(model.location_index(q), float(t), x, model.params), "input map")


def eval_linearization(model: HybridModel, t: float, x, u, q=0) -> np.ndarray:
    """``D_x f(t, x, u)``."""
    x = model._state(x)
    u = model._control(u)
    return _finite(model.kernels.A(model.location_index(q), float(t), x, u, model.params), "linearization")


def eval_guard(model: HybridModel, q, q_next, x) -> float:
    k = model.transition_index(q, q_next)
    return float(model.kernels.guard(k, model._state(x), model.params))


def eval_guard_gradient(model: HybridModel, q, q_next, x) -> np.ndarray:
    k = model.transition_index(q, q_next)
    return model.kernels.dguard(k, model._state(x), model.params)


def apply_reset(model: HybridModel, q, q_next, x_minus, tol: float = 1e-6) -> np.ndarray:
    """``Omega(x^-)``; the guard must (nearly) vanish at ``x^-``."""
    k = model.transition_index(q, q_next)
    x_minus = model._state(x_minus)
    g = model.kernels.guard(k, x_minus, model.params)
    if abs(g) > tol:
        raise UsageError(f"guard value {g:.3e} is not zero at the reset state")
    return model.kernels.reset(k, x_minus, model.params)


def variational_reset(model: HybridModel, q, q_next, x_minus, f_minus, f_plus) -> np.ndarray:
    """Linear map carrying a state variation across the transition, including the event-time shift."""
    k = model.transition_index(q, q_next)
    x_minus = model._state(x_minus)
    f_minus = model._state(f_minus)
    f_plus = model._state(f_plus)
    dphi = model.kernels.dguard(k, x_minus, model.params)
    if abs(dphi @ f_minus) < GRAZING_TOL:
        raise GrazingError(f"grazing transition: |DPhi . f-| = {abs(dphi @ f_minus):.3e}")
    return model.kernels.variational_reset(k, x_minus, f_minus, f_plus, model.params)
