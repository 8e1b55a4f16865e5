"""Benchmark systems with their controller and cost settings.

``build_benchmark(name, config)`` merges ``config`` over ``DEFAULTS[name]``
and returns a ready-to-run ``Benchmark``. Configs are plain nested dicts with
sections ``model``, ``cost``, ``controller`` and ``run``; matrices given as
flat lists are read as diagonals.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .._jit import njit
from ..sac_core import SacParams
from ..dynamics import HybridModel, SystemModel
from ..errors import ConfigError, UsageError
from ..objectives import QuadraticTrackingCost, barrier_weight
from . import bouncing, cart_pendulum, lqr, slip, terrain, two_link
from .lqr import LqrStabilizer

PI = float(np.pi)

DEFAULTS = {
    "double_integrator": {
        "model": {},
        "cost": {"Q": [1.0, 0.1], "P1": [1.0, 0.0], "x_d": [0.0, 0.0]},
        "controller": {"T": 1.0, "t_s": 0.01, "R": [1.0], "u_min": [-5.0], "u_max": [5.0], "gamma": -5.0},
        "run": {"x0": [1.0, 0.0], "duration": 5.0},
    },
    "cart_pendulum_swingup": {
        "model": {"g": 9.81, "h": 2.0},
        "cost": {"Q": [0.0, 0.0], "P1": [500.0, 0.0], "x_d": [0.0, 0.0], "angle_indices": [0]},
        "controller": {
            "T": 0.28, "t_s": 0.001, "R": [0.3], "u_min": [-25.0], "u_max": [25.0], "gamma": -5.0, "dt": 0.001,
        },
        "run": {"x0": [PI, 0.0], "duration": 4.0},
        "metric": {"Q": [1000.0, 10.0], "R": [0.3], "T_opt": 4.0, "angle_indices": [0]},
    },
    "cart_pendulum_barrier": {
        "model": {"g": 9.81, "h": 2.0},
        "cost": {
            "Q": [200.0, 0.0, 0.0, 50.0], "P1": [0.0, 0.0, 0.0, 0.0], "x_d": [0.0, 0.0, 0.0, 0.0],
            "angle_indices": [0], "barrier": {"index": 2, "scale": 2.0, "power": 8.0},
        },
        "controller": {"T": 1.5, "t_s": 0.1, "R": [0.3], "u_min": [-4.8], "u_max": [4.8], "gamma": -5.0, "dt": 0.005},
        "run": {"x0": [PI, 0.0, 0.0, 0.0], "duration": 10.0},
    },
    "cart_pendulum_ics": {
        "model": {"g": 9.81, "h": 2.0},
        "cost": {"Q": [1000.0, 10.0], "P1": [0.0, 0.0], "x_d": [0.0, 0.0], "angle_indices": [0]},
        "controller": {
            "T": 1.2, "t_s": 0.01, "R": [0.3], "u_min": [-25.0], "u_max": [25.0], "gamma": -15.0, "dt": 0.002,
            "time_search": False,
        },
        "run": {"x0": [PI, 0.0], "duration": 10.0},
    },
    "pendubot": {
        "model": dict(two_link.PENDUBOT),
        "cost": {"Q": [100.0, 1e-4, 200.0, 1e-4], "P1": [0.0, 0.0, 0.0, 0.0], "x_d": [0.0, 0.0, 0.0, 0.0], "angle_indices": [0, 2]},
        "controller": {
            "T": 0.5, "t_s": 0.005, "R": [0.1], "u_min": [-7.0], "u_max": [7.0], "gamma": -15.0, "dt": 0.001, "dt_init": 0.01,
        },
        "run": {"x0": [PI, 0.0, PI, 0.0], "duration": 10.0},
        "lqr": {"K": [-0.23, -1.74, -28.99, -3.86], "switch_indices": [0, 2], "switch_radius": 0.05},
    },
    "acrobot": {
        "model": dict(two_link.ACROBOT),
        "cost": {"Q": [1000.0, 0.0, 250.0, 0.0], "P1": [100.0, 0.0, 100.0, 0.0], "x_d": [0.0, 0.0, 0.0, 0.0], "angle_indices": [0, 2]},
        "controller": {
            "T": 0.6, "t_s": 0.0025, "R": [0.1], "u_min": [-15.0], "u_max": [15.0], "gamma": -15.0, "dt": 0.0025,
            "t_calc": 0.0001, "time_search": False,
        },
        "run": {"x0": [PI, 0.0, PI, 0.0], "duration": 30.0},
        "lqr": {"K": [-142.73, -54.27, -95.23, -48.42], "switch_indices": [0, 2], "switch_radius": 0.25},
    },
    "bounce_1d": {
        "model": {"g": 9.81},
        # running cost x'Qx without the one-half, i.e. 2Q in the half-weighted form
        "cost": {"Q": [400.0, 0.02], "P1": [0.0, 0.0], "x_d": [0.0, 0.0]},
        "controller": {"T": 0.691555, "t_s": 0.01, "R": [1.0], "u_min": [-10.0], "u_max": [10.0], "gamma": -10.0, "dt": 0.001},
        "run": {"x0": [1.0, 0.0], "q0": "q1", "duration": 0.0},
    },
    "ball_up": {
        "model": {"g": 9.81},
        "cost": {"Q": [0.0, 10.0, 0.0, 0.0], "P1": [10.0, 0.0, 0.0, 0.0], "x_d": [1.0, 1.0, 0.0, 0.0]},
        "controller": {
            "T": 0.5, "t_s": 0.01, "R": [1.0, 1.0], "u_min": [-10.0, -10.0], "u_max": [10.0, 0.0],
            "gamma": -10.0, "dt": 0.001, "time_search": False,
        },
        "run": {"x0": [0.0, 0.5, 0.0, 0.0], "q0": "q1", "duration": 10.0},
    },
    "ball_down": {
        "model": {"g": 9.81},
        "cost": {"Q": [0.0, 0.0, 0.0, 10.0], "P1": [10.0, 0.0, 0.0, 0.0], "x_d": [1.0, 0.0, 0.0, 0.0]},
        "controller": {
            "T": 0.5, "t_s": 0.01, "R": [1.0, 1.0], "u_min": [-10.0, -10.0], "u_max": [10.0, 0.0],
            "gamma": -10.0, "dt": 0.001, "time_search": False,
        },
        "run": {"x0": [0.0, 0.5, 0.0, 0.0], "q0": "q1", "duration": 10.0},
    },
    "slip_stairs": {
        "model": {"m": 1.0, "k": 100.0, "l0": 1.0, "g": 9.81, "terrain": "stairs"},
        "cost": {
            "Q": [0.0, 70.0, 0.0, 70.0, 50.0, 0.0, 0.0, 0.0], "P1": [0.0] * 8,
            "x_d": [0.0, 0.7, 0.0, 0.7, 1.4, 0.0, 0.0, 0.0], "follow_terrain": True,
        },
        "controller": {
            "T": 0.6, "t_s": 0.01, "R": [1.0, 1.0, 1.0], "u_min": [-5.0, -5.0, -30.0], "u_max": [5.0, 5.0, 30.0],
            "alpha_d": -10.0, "dt": 0.002,
        },
        "run": {"x0": [0.0, 0.7, 0.0, 0.7, 1.4, 0.0, 0.0, 0.0], "q0": "flight", "duration": 10.0},
    },
}


@dataclass(eq=False)
class Benchmark:
    name: str
    model: HybridModel
    cost: QuadraticTrackingCost
    params: SacParams
    x0: np.ndarray
    q0: object = 0
    duration: float = 10.0
    plant_dt: float | None = None
    stabilizer: LqrStabilizer | None = None
    metric: dict | None = None
    config: dict = field(default_factory=dict)


@njit
def _di_drift(t, x, p):
    return np.array([x[1], 0.0])


@njit
def _di_input(t, x, p):
    return np.array([[0.0], [1.0]])


@njit
def _di_jac(t, x, u, p):
    return np.array([[0.0, 1.0], [0.0, 0.0]])


def double_integrator() -> SystemModel:
    return SystemModel(2, 1, _di_drift, _di_input, _di_jac, name="double_integrator")


def _matrix(v, n=None):
    a = np.asarray(v, dtype=float)
    if a.ndim == 1:
        a = np.diag(a)
    if n is not None and a.shape != (n, n):
        raise ConfigError(f"expected a {n}x{n} matrix, got shape {a.shape}")
    return a


def merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _model(name: str, mc: dict) -> HybridModel:
    if name == "double_integrator":
        return double_integrator()
    if name == "cart_pendulum_barrier":
        return cart_pendulum.cart_pendulum(mc["g"], mc["h"])
    if name.startswith("cart_pendulum"):
        return cart_pendulum.cart_pendulum(mc["g"], mc["h"], reduced=True)
    if name in ("pendubot", "acrobot"):
        return two_link.two_link(name, **mc)
    if name == "bounce_1d":
        return bouncing.bounce_1d(mc["g"])
    if name.startswith("ball"):
        return bouncing.bouncing_ball(mc["g"])
    if name.startswith("slip"):
        tp = terrain.terrain(mc.get("terrain", "stairs"), **mc.get("terrain_params", {}))
        return slip.slip(tp, mc["m"], mc["k"], mc["l0"], mc["g"])
    raise UsageError(f"no model for benchmark {name!r}")


def build_benchmark(name: str, config: dict | None = None) -> Benchmark:
    """Model, cost, controller settings and initial condition for a named benchmark."""
    if name not in DEFAULTS:
        raise UsageError(f"unknown benchmark {name!r}; choose from {sorted(DEFAULTS)}")
    cfg = merge(DEFAULTS[name], config or {})
    unknown = set(cfg) - {"model", "cost", "controller", "run", "metric", "lqr"}
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}")
    model = _model(name, cfg["model"])
    n = model.n
    cc = cfg["cost"]
    weight = None
    if "barrier" in cc:
        b = cc["barrier"]
        weight = barrier_weight(int(b["index"]), float(b["scale"]), float(b.get("power", 8.0)))
    target = None
    if cc.get("follow_terrain"):
        target = slip.terrain_following_target(model.params[4:])
    cost = QuadraticTrackingCost(
        _matrix(cc["Q"], n), _matrix(cc.get("P1", [0.0] * n), n), cc.get("x_d"),
        angle_indices=cc.get("angle_indices", ()), weight=weight, target=target,
    )
    ctl = dict(cfg["controller"])
    ctl["R"] = _matrix(ctl["R"], model.m)
    try:
        params = SacParams(**ctl)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    run = cfg["run"]
    x0 = np.asarray(run["x0"], dtype=float)
    if x0.shape != (n,):
        raise ConfigError(f"x0 must have {n} entries")
    stab = None
    if "lqr" in cfg:
        lc = cfg["lqr"]
        stab = LqrStabilizer(
            lc["K"], np.zeros(n), params.u_min, params.u_max,
            tuple(lc["switch_indices"]), float(lc["switch_radius"]), tuple(cc.get("angle_indices", ())),
        )
    return Benchmark(
        name, model, cost, params, x0, run.get("q0", 0), float(run["duration"]), run.get("plant_dt"),
        stab, cfg.get("metric"), cfg,
    )


__all__ = [
    "Benchmark", "DEFAULTS", "build_benchmark", "merge", "double_integrator",
    "bouncing", "cart_pendulum", "lqr", "slip", "terrain", "two_link",
]
