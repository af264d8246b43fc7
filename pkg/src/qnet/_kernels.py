"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The kernels evaluate the longitudinal trace factors of the well
Helmholtz solutions for a batch of edge modes:

    same edge:      g(k2) =  k cot(k L)    (k2 = k^2, k imaginary -> q coth(q L))
    opposite edge:  h(k2) = -k / sin(k L)  (k imaginary -> -q / sinh(q L))

Both are analytic in k2 across k2 = 0 and are evaluated in a branch-safe,
overflow-safe way.  Backend selection: set the environment variable
``QNET_KERNELS`` to ``numpy`` or ``numba`` (default: numba when
importable, else numpy); ``set_backend`` overrides at runtime.
"""

from __future__ import annotations

import math
import os

import numpy as np

_SERIES_CUT = 1e-10  # |k2| L^2 below this: use the Taylor series in k2


# ---------------------------------------------------------------- numpy path

def _same_edge_numpy(k2: np.ndarray, length: float) -> np.ndarray:
    out = np.empty_like(k2)
    x2 = k2 * length * length
    small = np.abs(x2) < _SERIES_CUT
    pos = (k2 > 0) & ~small
    neg = (k2 < 0) & ~small

    k = np.sqrt(k2[pos])
    out[pos] = k / np.tan(k * length)

    q = np.sqrt(-k2[neg])
    qa = q * length
    # q coth(qa), overflow-safe: coth -> 1 once exp(-2qa) is negligible
    expm = np.exp(-2.0 * np.minimum(qa, 60.0))
    out[neg] = q * (1.0 + 2.0 * expm / (1.0 - expm))

    # k cot(kL) = 1/L - k2 L/3 - k2^2 L^3/45 + O(k2^3)
    out[small] = 1.0 / length - k2[small] * length / 3.0
    return out


def _opposite_edge_numpy(k2: np.ndarray, length: float) -> np.ndarray:
    out = np.empty_like(k2)
    x2 = k2 * length * length
    small = np.abs(x2) < _SERIES_CUT
    pos = (k2 > 0) & ~small
    neg = (k2 < 0) & ~small

    k = np.sqrt(k2[pos])
    out[pos] = -k / np.sin(k * length)

    q = np.sqrt(-k2[neg])
    qa = np.minimum(q * length, 745.0)
    em = np.exp(-qa)
    out[neg] = -2.0 * q * em / (1.0 - em * em)

    # -k/sin(kL) = -(1/L)(1 + k2 L^2/6 + 7 k2^2 L^4/360 + ...)
    out[small] = -(1.0 / length) * (1.0 + x2[small] / 6.0)
    return out


# ---------------------------------------------------------------- numba path

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def same_edge(k2, length):
        out = np.empty_like(k2)
        for i in range(k2.shape[0]):
            v = k2[i]
            x2 = v * length * length
            if abs(x2) < _SERIES_CUT:
                out[i] = 1.0 / length - v * length / 3.0
            elif v > 0.0:
                k = math.sqrt(v)
                out[i] = k / math.tan(k * length)
            else:
                q = math.sqrt(-v)
                qa = q * length
                if qa > 60.0:
                    out[i] = q
                else:
                    e = math.exp(-2.0 * qa)
                    out[i] = q * (1.0 + 2.0 * e / (1.0 - e))
        return out

    @njit(cache=True)
    def opposite_edge(k2, length):
        out = np.empty_like(k2)
        for i in range(k2.shape[0]):
            v = k2[i]
            x2 = v * length * length
            if abs(x2) < _SERIES_CUT:
                out[i] = -(1.0 / length) * (1.0 + x2 / 6.0)
            elif v > 0.0:
                k = math.sqrt(v)
                out[i] = -k / math.sin(k * length)
            else:
                q = math.sqrt(-v)
                qa = q * length
                if qa > 745.0:
                    out[i] = 0.0
                else:
                    e = math.exp(-qa)
                    out[i] = -2.0 * q * e / (1.0 - e * e)
        return out

    return same_edge, opposite_edge


_BACKENDS = {"numpy": (_same_edge_numpy, _opposite_edge_numpy)}
_active = "numpy"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> str:
    """Select the kernel backend ('numpy' or 'numba'). Returns the active name."""
    global _active
    if name == "numba" and "numba" not in _BACKENDS:
        try:
            _BACKENDS["numba"] = _build_numba()
        except ImportError as exc:  # pragma: no cover - depends on env
            raise ImportError("numba backend requested but numba is not installed") from exc
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}")
    _active = name
    return _active


def active_backend() -> str:
    return _active


def same_edge_factors(k2: np.ndarray, length: float) -> np.ndarray:
    return _BACKENDS[_active][0](k2, length)


def opposite_edge_factors(k2: np.ndarray, length: float) -> np.ndarray:
    return _BACKENDS[_active][1](k2, length)


def _init_from_env():
    choice = os.environ.get("QNET_KERNELS", "").strip().lower()
    if choice == "numpy":
        return set_backend("numpy")
    if choice == "numba":
        return set_backend("numba")
    try:
        return set_backend("numba")
    except ImportError:
        return set_backend("numpy")


_init_from_env()
