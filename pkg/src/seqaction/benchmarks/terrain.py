"""Ground height profiles ``z_G(x)``.

A terrain is a parameter vector ``tp = (kind, a, b, c, d)``:

* flat (kind 0): ``z_G = 0``
* stairs (kind 1): ``a`` logistic steps of rise ``b`` every ``c`` metres, sharpness ``d``
* sinusoid (kind 2): amplitude ``a``, wavelength ``b``, mean slope ``c``
"""
import numpy as np

from .._jit import njit
from ..errors import UsageError

FLAT, STAIRS, SINUSOID = 0.0, 1.0, 2.0
KINDS = {"flat": FLAT, "stairs": STAIRS, "sinusoid": SINUSOID}


@njit
def height(x, tp):
    kind = tp[0]
    if kind == 1.0:
        z = 0.0
        for n in range(1, int(tp[1]) + 1):
            z += tp[2] / (1.0 + np.exp(-tp[4] * (x - tp[3] * n)))
        return z
    if kind == 2.0:
        return tp[3] * x + tp[1] * np.sin(2.0 * np.pi * x / tp[2])
    return 0.0


@njit
def slope(x, tp):
    kind = tp[0]
    if kind == 1.0:
        s = 0.0
        for n in range(1, int(tp[1]) + 1):
            e = np.exp(-tp[4] * (x - tp[3] * n))
            s += tp[2] * tp[4] * e / (1.0 + e) ** 2
        return s
    if kind == 2.0:
        return tp[3] + tp[1] * 2.0 * np.pi / tp[2] * np.cos(2.0 * np.pi * x / tp[2])
    return 0.0


def terrain(kind: str = "stairs", **kw) -> np.ndarray:
    """Parameter vector for a named terrain; keyword arguments override the defaults."""
    if kind == "flat":
        return np.array([FLAT, 0.0, 0.0, 0.0, 0.0])
    if kind == "stairs":
        p = dict(steps=4, rise=0.5, run=0.7, sharpness=75.0)
        p.update(kw)
        return np.array([STAIRS, p["steps"], p["rise"], p["run"], p["sharpness"]], dtype=float)
    if kind == "sinusoid":
        p = dict(amplitude=0.05, wavelength=2.0, slope=0.0)
        p.update(kw)
        return np.array([SINUSOID, p["amplitude"], p["wavelength"], p["slope"], 0.0], dtype=float)
    raise UsageError(f"unknown terrain {kind!r}")


def ground_height(tp, x) -> np.ndarray:
    return np.array([height(float(xi), tp) for xi in np.atleast_1d(x)])
