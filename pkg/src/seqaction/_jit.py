"""Numba switch.

Set ``SEQACTION_NUMBA=0`` in the environment before import to run every
kernel as plain Python/NumPy. Results are identical up to floating point
reassociation; the pure path is only useful for debugging and benchmarks.
"""
import os

NUMBA_ENABLED = os.environ.get("SEQACTION_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

if NUMBA_ENABLED:
    try:
        import numba
    except ImportError:  # pragma: no cover
        NUMBA_ENABLED = False

if NUMBA_ENABLED:

    def njit(fn=None, **kwargs):
        kwargs.setdefault("cache", False)
        if fn is None:
            return lambda f: numba.njit(**kwargs)(f)
        return numba.njit(**kwargs)(fn)

else:

    def njit(fn=None, **kwargs):
        if fn is None:
            return lambda f: f
        return fn
