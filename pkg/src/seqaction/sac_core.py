"""One control action per sampling cycle, computed in closed form.

Each cycle predicts the nominal motion under the current control, sweeps the
adjoint backwards, evaluates the optimal action value at every node of the
horizon, picks when to act, saturates, and shrinks the duration until the
predicted cost drops.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels
from .dynamics import HybridModel
from .errors import ConfigError, NumericError, SacError, UsageError, ZenoError
from .integrator import HybridTrajectory, PiecewiseControl, Trajectory, simulate
from .objectives import Cost, eval_cost

SATURATION_MODES = ("element", "vector", "quadprog")


@dataclass
class SacParams:
    """Controller settings.

    Exactly one of ``alpha_d`` (fixed desired sensitivity) or ``gamma``
    (``alpha_d = gamma * J_init``) is given. ``None`` fields take their
    defaults from ``t_s``: ``t_calc = t_s / 2``, ``dt = t_s / 10``,
    ``dt_init = t_s`` and ``lambda_min = dt``.
    """

    T: float
    t_s: float
    R: np.ndarray
    u_min: np.ndarray
    u_max: np.ndarray
    alpha_d: float | None = None
    gamma: float | None = None
    t_calc: float | None = None
    beta: float = 1.6
    saturation: str = "element"
    omega: float = 0.55
    k_max: int = 10
    dt_init: float | None = None
    dJ_min: float = 0.0
    lambda_min: float | None = None
    dt: float | None = None
    time_search: bool = True
    max_transitions: int = 10
    max_run_transitions: int = 10_000

    def __post_init__(self):
        self.R = np.atleast_2d(np.asarray(self.R, dtype=float))
        m = self.R.shape[0]
        self.u_min = np.broadcast_to(np.asarray(self.u_min, dtype=float), (m,)).copy()
        self.u_max = np.broadcast_to(np.asarray(self.u_max, dtype=float), (m,)).copy()
        if self.t_calc is None:
            self.t_calc = 0.5 * self.t_s
        if self.dt is None:
            self.dt = self.t_s / 10.0
        if self.dt_init is None:
            self.dt_init = self.t_s
        if self.lambda_min is None:
            self.lambda_min = self.dt
        self.validate()

    @property
    def m(self) -> int:
        return self.R.shape[0]

    def validate(self):
        R = self.R
        if R.shape[0] != R.shape[1] or not np.allclose(R, R.T):
            raise ConfigError("R must be square and symmetric")
        if np.linalg.eigvalsh(R).min() <= 0:
            raise ConfigError("R must be positive definite")
        if not 0 < self.t_calc < self.t_s < self.T:
            raise ConfigError("require 0 < t_calc < t_s < T")
        if not 0 < self.omega < 1:
            raise ConfigError("omega must lie in (0, 1)")
        # zero must stay feasible; a bound may sit exactly at zero (one-sided thrust)
        if not (np.all(self.u_min <= 0) and np.all(self.u_max >= 0) and np.all(self.u_min < self.u_max)):
            raise ConfigError("control bounds must contain zero")
        if (self.alpha_d is None) == (self.gamma is None):
            raise ConfigError("give exactly one of alpha_d or gamma")
        if self.gamma is not None and not self.gamma < 0:
            raise ConfigError("gamma must be negative")
        if self.alpha_d is not None and not self.alpha_d <= 0:
            raise ConfigError("alpha_d must not be positive")
        if self.saturation not in SATURATION_MODES:
            raise ConfigError(f"saturation must be one of {SATURATION_MODES}")
        if self.k_max < 0 or self.dt <= 0 or self.dt_init <= 0 or self.lambda_min <= 0:
            raise ConfigError("k_max, dt, dt_init and lambda_min must be positive")

    def replace(self, **changes) -> "SacParams":
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Costate on the nodes of ``traj`` (pre/post values at transitions)."""

    times: np.ndarray
    rho: np.ndarray
    traj: Trajectory = field(repr=False)
    cost: Cost = field(repr=False)


@dataclass(frozen=True, eq=False)
class ActionSchedule:
    """Optimal action value and its figures of merit at every node of the horizon."""

    times: np.ndarray
    u2_star: np.ndarray
    insertion_gradient: np.ndarray
    J_tau: np.ndarray
    Gamma: np.ndarray
    u1: np.ndarray
    alpha_d: float
    admissible: np.ndarray


@dataclass(frozen=True)
class Action:
    """Control value applied for ``lam`` seconds around ``tau``.

    ``start``/``end`` give the part of that window actually committed this cycle.
    """

    value: np.ndarray
    tau: float
    lam: float
    start: float
    end: float


@dataclass
class StepInfo:
    t0: float
    J_init: float = float("nan")
    alpha_d: float = float("nan")
    tau: float = float("nan")
    lam: float = float("nan")
    J_new: float = float("nan")
    outcome: str = "null"
    wall: float = 0.0


_ADJOINT_KERNELS: dict = {}


def adjoint_kernels(model: HybridModel, cost: Cost):
    key = (model._fns, cost._fns)
    k = _ADJOINT_KERNELS.get(key)
    if k is None:
        k = _ADJOINT_KERNELS[key] = _kernels.build_adjoint_kernels(model.kernels, cost.kernels)
    return k


def _require_model(traj):
    if traj.model is None or traj.control is None:
        raise UsageError("trajectory must carry its model and control signal")
    return traj.model


def simulate_adjoint(traj: Trajectory, cost: Cost) -> AdjointTrajectory:
    """Backward RK4 of ``rho' = -grad l - A' rho`` from ``rho(tf) = grad m``, jumping at transitions."""
    model = _require_model(traj)
    pa, pb, pu = traj.control.arrays
    rho = adjoint_kernels(model, cost).adjoint(
        traj.times, traj.states, traj.locations, traj.event_nodes, traj.event_transitions,
        pa, pb, pu, model.params, cost.params,
    )
    if not np.all(np.isfinite(rho)):
        raise NumericError("adjoint diverged")
    return AdjointTrajectory(traj.times, rho, traj, cost)


def state_costate_at(adjoint: AdjointTrajectory, t: float, side: str = "+"):
    """``(q, x(t), rho(t))`` by re-integrating inside the interval containing ``t``."""
    traj = adjoint.traj
    model = traj.model
    T = traj.times
    if not T[0] <= t <= T[-1]:
        raise UsageError(f"t={t} outside the trajectory span")
    if side == "+":
        j = int(np.searchsorted(T, t, side="right")) - 1
    else:
        j = int(np.searchsorted(T, t, side="left"))
        if T[j] != t:
            j -= 1
    if T[j] == t:
        return int(traj.locations[j]), traj.states[j].copy(), adjoint.rho[j].copy()
    pa, pb, pu = traj.control.arrays
    q = int(traj.locations[j])
    x = model.kernels.advance(q, T[j], traj.states[j], t - T[j], pa, pb, pu, model.params)
    rho = adjoint_kernels(model, adjoint.cost).back_interval(
        q, t, x, T[j + 1], adjoint.rho[j + 1], pa, pb, pu, model.params, adjoint.cost.params
    )
    return q, x, rho


def mode_insertion_gradient(traj: Trajectory, adjoint: AdjointTrajectory, t: float, w) -> float:
    """``rho(t)' (f(x(t), w) - f(x(t), u1(t)))``: cost rate of switching to ``w`` briefly at ``t``."""
    model = _require_model(traj)
    w = model._control(w)
    q, x, rho = state_costate_at(adjoint, t)
    u1 = traj.control(t)
    f = model.kernels.f
    return float(rho @ (f(q, t, x, w, model.params) - f(q, t, x, u1, model.params)))


def choose_alpha_d(J1_init: float, params: SacParams) -> float:
    if J1_init < 0:
        raise UsageError("initial cost must be non-negative")
    if params.gamma is not None:
        if not params.gamma < 0:
            raise ConfigError("gamma must be negative")
        return params.gamma * J1_init
    return float(params.alpha_d)


def solve_action_values(Gamma, u1, R, alpha_d):
    """``(G G' + R')^-1 (G G' u1 + G alpha_d)`` for a stack of ``Gamma`` rows."""
    Gamma = np.atleast_2d(Gamma)
    u1 = np.atleast_2d(u1)
    Lam = Gamma[:, :, None] * Gamma[:, None, :]
    lhs = Lam + R.T[None]
    rhs = np.einsum("nij,nj->ni", Lam, u1) + Gamma * alpha_d
    return np.linalg.solve(lhs, rhs[..., None])[..., 0]


def optimal_action_schedule(traj: Trajectory, adjoint: AdjointTrajectory, params: SacParams, alpha_d: float | None = None, t0: float | None = None) -> ActionSchedule:
    """Closed-form optimal action value at every node, with insertion gradient and time-search objective."""
    model = _require_model(traj)
    if alpha_d is None:
        alpha_d = choose_alpha_d(eval_cost(adjoint.cost, traj), params)
    t0 = traj.t0 if t0 is None else t0
    T = traj.times
    H = model.kernels.h_nodes(T, traj.states, traj.locations, model.params)
    Gamma = np.einsum("nim,ni->nm", H, adjoint.rho)
    u1 = traj.controls
    u2 = solve_action_values(Gamma, u1, params.R, alpha_d)
    if not np.all(np.isfinite(u2)):
        raise NumericError("non-finite action schedule")
    mig = np.einsum("nm,nm->n", Gamma, u2 - u1)
    dtau = np.maximum(T - t0, 0.0)
    J_tau = np.linalg.norm(u2, axis=1) + mig + dtau ** params.beta
    admissible = (T > t0 + params.t_calc) & (T < T[-1])
    if len(traj.event_nodes):
        admissible[traj.event_nodes] = False
        admissible[traj.event_nodes + 1] = False
    return ActionSchedule(T, u2, mig, J_tau, Gamma, u1, float(alpha_d), admissible)


def search_application_time(schedule: ActionSchedule, t0: float, params: SacParams) -> float:
    """Admissible node minimising the time-search objective (earliest on ties)."""
    idx = np.flatnonzero(schedule.admissible & (schedule.times > t0 + params.t_calc))
    if idx.size == 0:
        raise UsageError("no admissible application time in the horizon")
    if not params.time_search:
        return float(schedule.times[idx[0]])
    j = idx[int(np.argmin(schedule.J_tau[idx]))]
    return float(schedule.times[j])


def _box_qp(H, c, lo, hi, tol=1e-8, max_sweeps=10_000):
    """Projected coordinate descent for ``min 0.5 u'Hu + c'u`` on a box."""
    u = np.clip(np.zeros_like(c), lo, hi)
    for _ in range(max_sweeps):
        for i in range(len(c)):
            r = c[i] + H[i] @ u - H[i, i] * u[i]
            u[i] = min(max(-r / H[i, i], lo[i]), hi[i])
        grad = H @ u + c
        if np.max(np.abs(u - np.clip(u - grad, lo, hi))) <= tol:
            break
    return u


def saturate_action(w, Gamma, params: SacParams, alpha_d: float | None = None, u1=None) -> np.ndarray:
    """Bring an action value inside the control bounds.

    ``element`` clips each component, ``vector`` scales the whole vector
    down until it fits, ``quadprog`` re-solves the action objective over the box
    (needs ``alpha_d``; ``u1`` defaults to zero).
    """
    w = np.atleast_1d(np.asarray(w, dtype=float))
    lo, hi = params.u_min, params.u_max
    if params.saturation == "element":
        return np.clip(w, lo, hi)
    if params.saturation == "vector":
        s = 1.0
        for wi, a, b in zip(w, lo, hi):
            if wi > b:
                s = min(s, b / wi)
            elif wi < a:
                s = min(s, a / wi)
        return s * w
    if alpha_d is None:
        raise UsageError("quadprog saturation needs alpha_d")
    G = np.atleast_1d(np.asarray(Gamma, dtype=float))
    u1 = np.zeros_like(G) if u1 is None else np.asarray(u1, dtype=float)
    H = np.outer(G, G) + params.R
    c = -G * (alpha_d + G @ u1)
    return _box_qp(H, c, lo, hi)


class Predictor:
    """Cost of the horizon under a candidate control, via the raw kernel."""

    def __init__(self, model: HybridModel, cost: Cost, params: SacParams):
        self.model = model
        self.cost = cost
        self.params = params

    def trajectory(self, x0, q0: int, control: PiecewiseControl, t0: float) -> Trajectory:
        p = self.params
        return simulate(self.model, x0, control, t0, t0 + p.T, p.dt, q0=q0, max_transitions=p.max_transitions)

    def cost_of(self, x0, q0: int, control: PiecewiseControl, t0: float) -> float:
        """Predicted cost, or ``inf`` when the prediction fails."""
        p = self.params
        k = self.model.kernels
        pa, pb, pu = control.arrays
        T, X, Q, ev, ek, status, _ = k.simulate(
            q0, t0, x0, t0 + p.T, p.dt, pa, pb, pu, self.model.params,
            self.model.tr_from, self.model.tr_to, self.model.tr_dir, p.max_transitions,
            1e-10 * p.T, 1e-8,
        )
        if status != _kernels.OK:
            return np.inf
        return float(self.cost.kernels.total(T, X, self.cost.params))


def line_search_duration(predictor: Predictor, x0, q0: int, nominal: PiecewiseControl, t0: float, value, tau: float, J_init: float):
    """Shrink ``lam = omega**k * dt_init`` until the cost drops by ``dJ_min``.

    Returns ``(lam, J_new)``; ``lam`` is None when every trial fails.
    """
    p = predictor.params
    tf = t0 + p.T
    last = None
    for k in range(p.k_max + 1):
        lam = max(p.omega ** k * p.dt_init, p.lambda_min)
        if lam == last:
            break
        last = lam
        a = max(tau - 0.5 * lam, t0)
        b = min(tau + 0.5 * lam, tf)
        J_new = predictor.cost_of(x0, q0, nominal.add(a, b, value), t0)
        if J_new - J_init <= p.dJ_min:
            return lam, J_new
    return None, np.nan


class SacController:
    """Stateless per-cycle synthesis for one model/cost pair."""

    def __init__(self, model: HybridModel, cost: Cost, params: SacParams):
        if params.m != model.m:
            raise ConfigError(f"R is {params.m}x{params.m} but the model has {model.m} inputs")
        self.model = model
        self.cost = cost
        self.params = params
        self.predictor = Predictor(model, cost, params)

    def step(self, t0: float, x, q=0, nominal: PiecewiseControl | None = None):
        """Returns ``(action or None, StepInfo)``."""
        wall = time.perf_counter()
        p = self.params
        model = self.model
        x = model._state(x)
        q = model.location_index(q)
        nominal = PiecewiseControl.zero(model.m) if nominal is None else nominal
        info = StepInfo(t0=t0)
        action = None
        try:
            traj = self.predictor.trajectory(x, q, nominal, t0)
        except (ZenoError, NumericError) as exc:
            info.outcome = f"prediction failed: {type(exc).__name__}"
            info.wall = time.perf_counter() - wall
            return None, info
        J_init = eval_cost(self.cost, traj)
        info.J_init = J_init
        alpha_d = choose_alpha_d(J_init, p)
        info.alpha_d = alpha_d
        if alpha_d == 0.0:
            info.outcome = "null"
        else:
            action = self._synthesise(traj, J_init, alpha_d, x, q, nominal, t0, info)
        info.wall = time.perf_counter() - wall
        return action, info

    def _synthesise(self, traj, J_init, alpha_d, x, q, nominal, t0, info):
        p = self.params
        adjoint = simulate_adjoint(traj, self.cost)
        sched = optimal_action_schedule(traj, adjoint, p, alpha_d, t0)
        try:
            tau = search_application_time(sched, t0, p)
        except UsageError:
            info.outcome = "no admissible time"
            return None
        info.tau = tau
        w_lo = t0 + p.t_calc
        w_hi = t0 + p.t_s + p.t_calc
        if tau - 0.5 * p.dt_init >= w_hi:
            info.outcome = "deferred"
            return None
        j = int(np.searchsorted(sched.times, tau, side="right")) - 1
        value = saturate_action(sched.u2_star[j], sched.Gamma[j], p, alpha_d, sched.u1[j])
        if not np.any(value != sched.u1[j]):
            info.outcome = "null"
            return None
        lam, J_new = line_search_duration(self.predictor, x, q, nominal, t0, value, tau, J_init)
        if lam is None:
            info.outcome = "rejected"
            return None
        info.lam = lam
        info.J_new = J_new
        start = max(tau - 0.5 * lam, w_lo)
        end = min(tau + 0.5 * lam, w_hi)
        if end <= start:
            info.outcome = "deferred"
            return None
        info.outcome = "accepted"
        return Action(value, tau, lam, start, end)


def sac_step(x_init, t0: float, model: HybridModel, cost: Cost, params: SacParams, u_prev: PiecewiseControl | None = None, q=0):
    """One synthesis cycle; see ``SacController.step``."""
    return SacController(model, cost, params).step(t0, x_init, q, u_prev)


@dataclass(eq=False)
class ClosedLoopResult:
    """Closed-loop record: trajectory on the sample grid (plus transition pairs) and per-cycle log."""

    trajectory: Trajectory
    log: list
    J_accum: np.ndarray
    wall_time: float
    switched_at: float | None = None
    error: SacError | None = None

    @property
    def accepted(self) -> int:
        return sum(1 for r in self.log if r.outcome == "accepted")

    @property
    def rejected(self) -> int:
        return sum(1 for r in self.log if r.outcome == "rejected")

    @property
    def transitions(self) -> int:
        return len(self.trajectory.event_nodes)


def run_closed_loop(
    model: HybridModel,
    cost: Cost,
    params: SacParams,
    x0,
    duration: float,
    q0=0,
    t0: float = 0.0,
    supervisor: Callable | None = None,
    plant_dt: float | None = None,
    raise_on_error: bool = True,
) -> ClosedLoopResult:
    """Run the controller every ``t_s`` against a simulated plant.

    ``supervisor`` (optional) has ``ready(t, x, q)`` and ``__call__(t, x, q)``.
    From the first sample where ``ready`` holds it stays in charge, and its
    output, clipped to the bounds, is held over each sample.
    """
    p = params
    if duration < 0:
        raise UsageError("duration must be non-negative")
    controller = SacController(model, cost, p)
    plant_dt = p.dt if plant_dt is None else plant_dt
    x = model._state(x0).copy()
    q = model.location_index(q0)
    n_cycles = int(round(duration / p.t_s))
    if abs(n_cycles * p.t_s - duration) > 1e-9 * max(1.0, duration):
        raise UsageError("duration must be a multiple of t_s")
    times = [t0]
    states = [x.copy()]
    locs = [q]
    events = []
    ev_k = []
    starts, ends, values = [], [], []
    committed = PiecewiseControl.zero(model.m)
    log = []
    wall0 = time.perf_counter()
    switched_at = None
    error = None
    t = t0
    for c in range(n_cycles):
        t = t0 + c * p.t_s
        t_next = t0 + (c + 1) * p.t_s
        hold = None
        if supervisor is not None:
            if switched_at is not None or supervisor.ready(t, x, q):
                if switched_at is None:
                    switched_at = t
                hold = np.clip(supervisor(t, x, q), p.u_min, p.u_max)
        if hold is not None:
            committed = committed.after(t).add(t, t_next, hold)
            starts.append(t)
            ends.append(t_next)
            values.append(hold)
            log.append(StepInfo(t0=t, outcome="supervisor"))
        else:
            action, info = controller.step(t, x, q, committed)
            log.append(info)
            if action is not None:
                committed = committed.add(action.start, action.end, action.value)
                starts.append(action.start)
                ends.append(action.end)
                values.append(action.value)
        try:
            seg = simulate(model, x, committed, t, t_next, plant_dt, q0=q, max_transitions=p.max_transitions)
        except SacError as exc:
            error = exc
            break
        for i in seg.event_nodes:
            events.append(len(times))
            times.extend([seg.times[i], seg.times[i + 1]])
            states.extend([seg.states[i], seg.states[i + 1]])
            locs.extend([seg.locations[i], seg.locations[i + 1]])
        ev_k.extend(seg.event_transitions.tolist())
        x = seg.states[-1].copy()
        q = int(seg.locations[-1])
        times.append(t_next)
        states.append(x.copy())
        locs.append(q)
        committed = committed.after(t_next)
        if len(events) > p.max_run_transitions:
            error = ZenoError(f"more than {p.max_run_transitions} transitions in the run")
            break
    history = PiecewiseControl(model.m, starts, ends, np.array(values).reshape(-1, model.m))
    T = np.array(times)
    X = np.array(states).reshape(-1, model.n)
    U = _kernels.controls_at(T, *history.arrays)
    traj = HybridTrajectory(
        T, X, U, np.array(locs, dtype=np.int64), np.array(events, dtype=np.int64),
        np.array(ev_k, dtype=np.int64), model=model, control=history,
    )
    from .objectives import running_cost_series

    J_accum = running_cost_series(cost, traj)
    result = ClosedLoopResult(traj, log, J_accum, time.perf_counter() - wall0, switched_at, error)
    if error is not None and raise_on_error:
        error.result = result
        raise error
    return result


def equilibrium_feedback_gain(A, B, Q, P1, R, T: float, alpha_d: float, steps: int = 1000):
    """Linear feedback equivalent of the action value near an equilibrium.

    Integrates ``P' = -Q - A'P - PA`` backwards from ``P(T) = P1`` with RK4
    and returns ``(K, times, P)`` with ``K = -alpha_d R^-1 B' P(0)`` so that
    ``u2* ~ -K x`` for small ``x``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = np.atleast_2d(np.asarray(P1, dtype=float)).copy()

    def rhs(P):
        return -Q - A.T @ P - P @ A

    h = T / steps
    Ps = [P.copy()]
    for _ in range(steps):
        k1 = rhs(P)
        k2 = rhs(P - 0.5 * h * k1)
        k3 = rhs(P - 0.5 * h * k2)
        k4 = rhs(P - h * k3)
        P = P - (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        Ps.append(P.copy())
    times = np.linspace(T, 0.0, steps + 1)[::-1]
    Ps = np.array(Ps[::-1])
    K = -alpha_d * np.linalg.solve(R, B.T @ Ps[0])
    return K, times, Ps
