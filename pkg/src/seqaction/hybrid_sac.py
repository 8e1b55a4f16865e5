"""Sensitivity of a hybrid trajectory's cost to a short control perturbation.

The running cost is appended to the state as an extra leading coordinate, so
variations ``Psi_bar = (nu, Psi)`` and costates ``rho_bar = (1, rho)`` live in
``n + 1`` dimensions. Variations flow forward through the linearised dynamics
and jump through the variational reset at each transition; the costate flows
backward and jumps through its transpose. Their inner product is constant
after the perturbation and equals the first-order change in cost.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .sac_core import (
    AdjointTrajectory,
    SacController,
    _require_model,
    simulate_adjoint,
    state_costate_at,
)
from .dynamics import GRAZING_TOL, HybridModel
from .errors import GrazingError, UsageError
from .integrator import Trajectory
from .objectives import Cost

_VARIATION_KERNELS: dict = {}


def _variation_kernels(model: HybridModel, cost: Cost):
    key = (model._fns, cost._fns)
    k = _VARIATION_KERNELS.get(key)
    if k is None:
        k = _VARIATION_KERNELS[key] = _kernels.build_variation_kernels(model.kernels, cost.kernels)
    return k


@dataclass(frozen=True, eq=False)
class MayerAugmentedModel:
    """Dynamics with the running cost appended as a leading state coordinate."""

    model: HybridModel
    cost: Cost

    @property
    def n(self) -> int:
        return self.model.n + 1

    def f_bar(self, q, t, x, u) -> np.ndarray:
        k = self.model.kernels
        x = self.model._state(x)
        u = self.model._control(u)
        return np.concatenate([[self.cost.running(t, x)], k.f(int(q), float(t), x, u, self.model.params)])

    def A_bar(self, q, t, x, u) -> np.ndarray:
        k = self.model.kernels
        x = self.model._state(x)
        u = self.model._control(u)
        n = self.model.n
        out = np.zeros((n + 1, n + 1))
        out[0, 1:] = self.cost.kernels.dl(float(t), x, self.cost.params)
        out[1:, 1:] = k.A(int(q), float(t), x, u, self.model.params)
        return out

    def Pi_bar(self, k: int, t: float, x_minus, x_plus, u_minus, u_plus, q_minus, q_plus) -> np.ndarray:
        """Augmented variational reset for transition ``k`` at time ``t``."""
        mk = self.model.kernels
        p = self.model.params
        x_minus, x_plus = self.model._state(x_minus), self.model._state(x_plus)
        u_minus, u_plus = self.model._control(u_minus), self.model._control(u_plus)
        fm = mk.f(int(q_minus), t, x_minus, u_minus, p)
        fp = mk.f(int(q_plus), t, x_plus, u_plus, p)
        dphi = mk.dguard(k, x_minus, p)
        den = float(dphi @ fm)
        if abs(den) < GRAZING_TOL:
            raise GrazingError(f"grazing transition at t={t:.6g}")
        n = self.model.n
        out = np.zeros((n + 1, n + 1))
        out[0, 0] = 1.0
        out[0, 1:] = (self.cost.running(t, x_plus) - self.cost.running(t, x_minus)) / den * dphi
        out[1:, 1:] = mk.variational_reset(k, x_minus, fm, fp, p)
        return out

    def running_integral(self, traj: Trajectory) -> np.ndarray:
        """Cost coordinate of the augmented trajectory at every node (starts at zero)."""
        pa, pb, pu = traj.control.arrays
        return _variation_kernels(self.model, self.cost).running_integral(
            traj.times, traj.states, traj.locations, traj.event_nodes, pa, pb, pu, self.model.params, self.cost.params
        )


def augment_mayer(model: HybridModel, cost: Cost) -> MayerAugmentedModel:
    return MayerAugmentedModel(model, cost)


@dataclass(frozen=True, eq=False)
class VariationalTrajectory:
    """``Psi_bar`` from the perturbation time onward (two rows at each transition)."""

    times: np.ndarray
    psi_bar: np.ndarray
    origin: tuple
    traj: Trajectory = field(repr=False)


@dataclass(frozen=True, eq=False)
class HybridAdjointTrajectory:
    times: np.ndarray
    rho_bar: np.ndarray
    adjoint: AdjointTrajectory = field(repr=False)

    @property
    def rho(self) -> np.ndarray:
        return self.rho_bar[:, 1:]


def transition_time_derivative(x_minus, psi_minus, guard_grad, f_minus) -> float:
    """``-(DPhi . Psi^-) / (DPhi . f^-)``; ``guard_grad`` is the gradient or a callable of ``x``."""
    x_minus = np.asarray(x_minus, dtype=float)
    dphi = guard_grad(x_minus) if callable(guard_grad) else np.asarray(guard_grad, dtype=float)
    den = float(dphi @ np.asarray(f_minus, dtype=float))
    if abs(den) < GRAZING_TOL:
        raise GrazingError(f"grazing transition: |DPhi . f-| = {abs(den):.3e}")
    return -float(dphi @ np.asarray(psi_minus, dtype=float)) / den


def _interior_index(traj: Trajectory, tau: float) -> int:
    T = traj.times
    if not T[0] <= tau < T[-1]:
        raise UsageError(f"tau={tau} must lie in [t0, tf)")
    j = int(np.searchsorted(T, tau, side="right")) - 1
    ev = set(int(i) for i in traj.event_nodes) | set(int(i) + 1 for i in traj.event_nodes)
    if T[j] == tau and j in ev:
        raise UsageError("perturbation time coincides with a transition")
    return j


def _perturbation(aug: MayerAugmentedModel, traj: Trajectory, q: int, tau: float, x, w, a: float) -> np.ndarray:
    u = traj.control(tau)
    w = aug.model._control(w)
    # the running cost does not depend on the control, so the cost row cancels
    return (aug.f_bar(q, tau, x, w) - aug.f_bar(q, tau, x, u)) * a


def propagate_variation(aug: MayerAugmentedModel, traj: Trajectory, tau: float, w, a: float = 1.0) -> VariationalTrajectory:
    """Forward variation caused by switching the control to ``w`` for ``a * eps`` seconds ending at ``tau``."""
    _require_model(traj)
    model = aug.model
    j0 = _interior_index(traj, tau)
    pa, pb, pu = traj.control.arrays
    q = int(traj.locations[j0])
    x_tau = model.kernels.advance(q, traj.times[j0], traj.states[j0], tau - traj.times[j0], pa, pb, pu, model.params)
    psi0 = _perturbation(aug, traj, q, tau, x_tau, w, a)
    for i in traj.event_nodes:
        if traj.times[i] > tau:
            dphi = model.kernels.dguard(int(traj.event_transitions[list(traj.event_nodes).index(i)]), traj.states[i], model.params)
            fm = model.kernels.f(int(traj.locations[i]), traj.times[i], traj.states[i], traj.control(traj.times[i] - 1e-12), model.params)
            if abs(dphi @ fm) < GRAZING_TOL:
                raise GrazingError(f"grazing transition at t={traj.times[i]:.6g}")
    psi = _variation_kernels(model, aug.cost).variation(
        traj.times, traj.states, traj.locations, traj.event_nodes, traj.event_transitions,
        j0, float(tau), x_tau, psi0, pa, pb, pu, model.params, aug.cost.params,
    )
    times = np.concatenate([[tau], traj.times[j0 + 1:]])
    return VariationalTrajectory(times, psi, (float(tau), np.atleast_1d(w).astype(float), float(a)), traj)


def simulate_hybrid_adjoint(aug: MayerAugmentedModel, traj: Trajectory, cost: Cost | None = None) -> HybridAdjointTrajectory:
    """Backward costate ``(1, rho)`` with transposed variational resets at transitions."""
    cost = aug.cost if cost is None else cost
    adj = simulate_adjoint(traj, cost)
    rho_bar = np.hstack([np.ones((len(adj.times), 1)), adj.rho])
    return HybridAdjointTrajectory(adj.times, rho_bar, adj)


def hybrid_adjoint_at(adjoint: HybridAdjointTrajectory, t: float, side: str = "+"):
    q, x, rho = state_costate_at(adjoint.adjoint, t, side)
    return q, x, np.concatenate([[1.0], rho])


def hybrid_sensitivity(adjoint: HybridAdjointTrajectory, traj: Trajectory, tau: float, w, a: float = 1.0) -> float:
    """First-order cost change per unit perturbation duration, from the costate alone."""
    model = _require_model(traj)
    _interior_index(traj, tau)
    aug = MayerAugmentedModel(model, adjoint.adjoint.cost)
    q, x, rho_bar = hybrid_adjoint_at(adjoint, tau)
    return float(rho_bar @ _perturbation(aug, traj, q, tau, x, w, a))


def terminal_sensitivity(variation: VariationalTrajectory, cost: Cost) -> float:
    """``nu(tf) = (1, grad m(x(tf))) . Psi_bar(tf)``."""
    xf = variation.traj.states[-1]
    rho_f = np.concatenate([[1.0], cost.kernels.dm(xf, cost.params)])
    return float(rho_f @ variation.psi_bar[-1])


def hybrid_sac_step(x_init, t0: float, model: HybridModel, cost: Cost, params, u_prev=None, q=0):
    """One synthesis cycle using the costate with reset jumps; line search re-simulates the hybrid plant."""
    return SacController(model, cost, params).step(t0, x_init, q, u_prev)
