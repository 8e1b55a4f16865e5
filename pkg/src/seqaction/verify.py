"""Numerical self-checks: sensitivity reproduction, adjoint constancy, gradient and optimality oracles.

Every suite returns a list of ``Check`` records; a suite passes when all of
its checks do. The command line ``verify`` subcommand prints them as JSON.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .benchmarks import build_benchmark
from .sac_core import (
    choose_alpha_d,
    mode_insertion_gradient,
    optimal_action_schedule,
    simulate_adjoint,
)
from .dynamics import eval_dynamics
from .errors import UsageError
from .hybrid_sac import (
    augment_mayer,
    hybrid_adjoint_at,
    hybrid_sensitivity,
    propagate_variation,
    simulate_hybrid_adjoint,
    terminal_sensitivity,
    transition_time_derivative,
)
from .integrator import PiecewiseControl, integrate_hybrid
from .objectives import eval_cost


@dataclass
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        d["value"] = float(d["value"])
        d["limit"] = float(d["limit"])
        d["passed"] = bool(d["passed"])
        return d


def _within(name, value, limit, detail=""):
    return Check(name, float(value), float(limit), bool(value <= limit), detail)


# -- bounce-1D ---------------------------------------------------------------

BOUNCE_TAU = 0.1
BOUNCE_W = -5.0
BOUNCE_EPS = 0.1


def bounce_1d_numbers(dt: float = 1e-3) -> dict:
    """Sensitivity figures for a 1 m drop with a ``w = -5`` perturbation at ``tau = 0.1``."""
    b = build_benchmark("bounce_1d")
    traj = integrate_hybrid(b.model, "q1", b.x0, None, (0.0, b.params.T), dt)
    aug = augment_mayer(b.model, b.cost)
    adj = simulate_hybrid_adjoint(aug, traj)
    var = propagate_variation(aug, traj, BOUNCE_TAU, [BOUNCE_W])
    i = int(traj.event_nodes[0])
    row = i - (len(traj.times) - len(var.times))
    xm, xp = traj.states[i], traj.states[i + 1]
    t_i = float(traj.times[i])
    fm = eval_dynamics(b.model, t_i, xm, [0.0], "q1")
    dphi = np.array([1.0, 0.0])
    dtde = transition_time_derivative(xm, var.psi_bar[row][1:], dphi, fm)
    Pi = aug.Pi_bar(0, t_i, xm, xp, [0.0], [0.0], 0, 1)[1:, 1:]
    g = float(b.model.params[0])
    Pi_ref = np.array([[-1.0, 0.0], [(-2.0 * g + 2.0 * 0.0) / xm[1], -1.0]])
    return {
        "nu_adjoint": hybrid_sensitivity(adj, traj, BOUNCE_TAU, [BOUNCE_W]),
        "nu_forward": terminal_sensitivity(var, b.cost),
        "dt_deps": dtde,
        "dt_shift": BOUNCE_EPS * dtde,
        "impact_time": t_i,
        "Pi": Pi,
        "Pi_reference": Pi_ref,
    }


def suite_bounce1d(seed: int = 0) -> list:
    r = bounce_1d_numbers()
    return [
        _within("nu via adjoint", abs(r["nu_adjoint"] - 4.0), 0.02, f"nu={r['nu_adjoint']:.6f}"),
        _within("nu via forward variation", abs(r["nu_forward"] - 4.0), 0.02, f"nu={r['nu_forward']:.6f}"),
        _within("d(dt_i)/d(eps)", abs(r["dt_deps"] + 0.4) / 0.4, 0.01, f"value={r['dt_deps']:.6f}"),
        _within("impact time shift", abs(r["dt_shift"] + 0.04), 0.0005, f"dt={r['dt_shift']:.6f} s"),
        _within("variational reset", np.abs(r["Pi"] - r["Pi_reference"]).max(), 1e-9),
    ]


# -- adjoint constancy ---------------------------------------------------------


def constancy_deviation(aug, traj, adj, tau: float, w) -> tuple:
    """``(max |rho_bar . Psi_bar - nu(tf)|, nu(tf))`` over ``[tau, tf]``."""
    var = propagate_variation(aug, traj, tau, w)
    nu = terminal_sensitivity(var, aug.cost)
    off = len(traj.times) - len(var.times)
    rho = np.vstack([hybrid_adjoint_at(adj, tau)[2], adj.rho_bar[off + 1:]])
    prod = np.einsum("ij,ij->i", rho, var.psi_bar)
    return float(np.abs(prod - nu).max()), nu


def _random_interior_tau(rng, traj, margin: float = 5e-3) -> float:
    t_ev = traj.transition_times
    while True:
        tau = rng.uniform(traj.t0 + margin, traj.tf - margin)
        if t_ev.size == 0 or np.abs(t_ev - tau).min() > margin:
            return float(tau)


def impact_scenarios():
    """Bounce-1D and bouncing-ball trajectories with at least three impacts."""
    out = []
    b = build_benchmark("bounce_1d")
    traj = integrate_hybrid(b.model, "q1", b.x0, None, (0.0, 2.6), 1e-3)
    out.append(("bounce_1d", b, traj))
    b = build_benchmark("ball_down")
    traj = integrate_hybrid(b.model, "q1", [0.0, 1.0, 0.5, 0.0], None, (0.0, 2.6), 1e-3)
    out.append(("ball", b, traj))
    return out


def suite_adjoint(seed: int = 0, samples: int = 20) -> list:
    rng = np.random.default_rng(seed)
    checks = []
    for name, b, traj in impact_scenarios():
        aug = augment_mayer(b.model, b.cost)
        adj = simulate_hybrid_adjoint(aug, traj)
        worst = 0.0
        for _ in range(samples):
            tau = _random_interior_tau(rng, traj)
            w = rng.uniform(b.params.u_min, b.params.u_max)
            dev, nu = constancy_deviation(aug, traj, adj, tau, w)
            worst = max(worst, dev / (1e-5 * abs(nu) + 1e-9))
        checks.append(_within(f"{name}: constancy (impacts={traj.event_nodes.size})", worst, 1.0, "deviation / (1e-5|nu| + 1e-9)"))
    return checks


# -- finite-difference gradient oracle ---------------------------------------------


def _fd_slope(b, x0, q0, nominal, tau, w, lam, tf, dt):
    base = integrate_hybrid(b.model, q0, x0, nominal, (0.0, tf), dt)
    pert = integrate_hybrid(b.model, q0, x0, nominal.add(tau - 0.5 * lam, tau + 0.5 * lam, w), (0.0, tf), dt)
    return (eval_cost(b.cost, pert) - eval_cost(b.cost, base)) / lam, base


def gradient_cases():
    """``(label, benchmark, x0, q0, nominal, tf, dt, hybrid)`` used by the gradient oracle."""
    cases = []
    b = build_benchmark("cart_pendulum_swingup", {"cost": {"Q": [10.0, 1.0]}})
    nominal = PiecewiseControl.from_function(lambda t: 3.0 * np.sin(4.0 * t), 1, 0.0, 1.0, 0.01)
    cases.append(("cart_pendulum", b, np.array([2.5, 0.3]), 0, nominal, 1.0, 1e-3, False))
    b = build_benchmark("double_integrator")
    nominal = PiecewiseControl.constant([0.5], 0.0, 1.0)
    cases.append(("double_integrator", b, np.array([1.0, -0.5]), 0, nominal, 1.0, 1e-3, False))
    b = build_benchmark("ball_down", {"cost": {"Q": [1.0, 1.0, 1.0, 10.0]}})
    nominal = PiecewiseControl.constant([1.0, -2.0], 0.0, 2.0)
    cases.append(("bouncing_ball", b, np.array([0.0, 1.0, 0.5, 0.0]), "q1", nominal, 2.0, 1e-3, True))
    return cases


def suite_gradient(seed: int = 0, samples: int = 3, lam: float = 1e-4) -> list:
    rng = np.random.default_rng(seed)
    checks = []
    for label, b, x0, q0, nominal, tf, dt, hybrid in gradient_cases():
        worst = 0.0
        base = integrate_hybrid(b.model, q0, x0, nominal, (0.0, tf), dt)
        aug = augment_mayer(b.model, b.cost)
        adj = simulate_hybrid_adjoint(aug, base) if hybrid else simulate_adjoint(base, b.cost)
        for _ in range(samples):
            tau = _random_interior_tau(rng, base, margin=0.05)
            w = rng.uniform(b.params.u_min, b.params.u_max)
            fd, _ = _fd_slope(b, x0, q0, nominal, tau, w, lam, tf, dt)
            an = hybrid_sensitivity(adj, base, tau, w) if hybrid else mode_insertion_gradient(base, adj, tau, w)
            worst = max(worst, abs(an - fd) / max(abs(fd), 1e-12))
        checks.append(_within(f"{label}: analytic vs finite difference", worst, 0.05, "relative error"))
    return checks


# -- closed-form optimality -------------------------------------------------------


def _l2(Gamma, u1, R, alpha_d, u2):
    d = Gamma @ (u2 - u1) - alpha_d
    return 0.5 * d * d + 0.5 * u2 @ R @ u2


def grid_minimize(fn, center, half_width, m: int, points: int = 41, rounds: int = 12) -> np.ndarray:
    """Minimise ``fn`` over a box by repeated dense grids, each zoomed around the last best point."""
    c = np.asarray(center, dtype=float).copy()
    hw = np.full(m, float(half_width))
    for _ in range(rounds):
        axes = [np.linspace(c[i] - hw[i], c[i] + hw[i], points) for i in range(m)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
        vals = np.array([fn(u) for u in mesh])
        c = mesh[int(np.argmin(vals))]
        hw = hw * 4.0 / (points - 1)
    return c


def optimality_cases():
    cases = []
    for name in ("double_integrator", "cart_pendulum_swingup", "ball_down"):
        b = build_benchmark(name)
        x0 = {"double_integrator": [1.0, 0.5], "cart_pendulum_swingup": [2.0, 0.5], "ball_down": [0.0, 1.0, 0.5, 0.0]}[name]
        tf = min(b.params.T, 0.4)
        nominal = PiecewiseControl.constant(0.2 * np.asarray(b.params.u_min), 0.0, tf)
        cases.append((name, b, np.asarray(x0, dtype=float), b.q0, nominal, tf))
    return cases


def suite_optimality(seed: int = 0, nodes: int = 20) -> list:
    rng = np.random.default_rng(seed)
    checks = []
    for name, b, x0, q0, nominal, tf in optimality_cases():
        traj = integrate_hybrid(b.model, q0, x0, nominal, (0.0, tf), b.params.dt)
        adj = simulate_adjoint(traj, b.cost)
        alpha_d = choose_alpha_d(eval_cost(b.cost, traj), b.params)
        sched = optimal_action_schedule(traj, adj, b.params, alpha_d=alpha_d)
        R = b.params.R
        scale = np.abs(sched.u2_star).max() + 1.0
        worst_res = 0.0
        for G, u1, u2 in zip(sched.Gamma, sched.u1, sched.u2_star):
            grad = G * (G @ (u2 - u1) - alpha_d) + R @ u2
            size = np.abs(G).max() * (np.abs(G @ (u2 - u1)) + abs(alpha_d)) + np.abs(R @ u2).max() + 1.0
            worst_res = max(worst_res, np.abs(grad).max() / size)
        worst_gap = 0.0
        for j in rng.choice(len(traj.times), size=min(nodes, len(traj.times)), replace=False):
            G, u1, u2 = sched.Gamma[j], sched.u1[j], sched.u2_star[j]
            best = grid_minimize(lambda u: _l2(G, u1, R, alpha_d, u), np.zeros(b.model.m), 2.0 * scale, b.model.m)
            worst_gap = max(worst_gap, np.abs(best - u2).max())
        checks.append(_within(f"{name}: closed form vs grid minimum", worst_gap, 1e-3, "max component gap"))
        checks.append(_within(f"{name}: stationarity residual", worst_res, 1e-8, "scaled gradient norm"))
    return checks


SUITES = {
    "bounce1d": suite_bounce1d,
    "adjoint": suite_adjoint,
    "gradient": suite_gradient,
    "optimality": suite_optimality,
}


def run_suite(name: str, seed: int = 0) -> list:
    if name == "all":
        return [c for s in SUITES.values() for c in s(seed)]
    if name not in SUITES:
        raise UsageError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name](seed)
