"""Numerical kernels with interchangeable numba and numpy backends.

The numba versions are explicit loops compiled on first use; the numpy
versions are the vectorized equivalents. The environment variable
SQUEEZEKIT_BACKEND picks one ("numba" or "numpy"); unset, numba is used
when importable. set_backend switches at runtime, which the test suite
and benchmarks/bench_backends.py rely on to exercise both.
"""

import os

import numpy as np

from .errors import ConfigError

ENV_VAR = "SQUEEZEKIT_BACKEND"


def _numpy_cumtrapz(y, x):
    out = np.empty_like(y)
    out[0] = 0.0
    np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x), out=out[1:])
    return out


def _numpy_row_power(rows):
    return np.einsum("...i,...i->...", rows, rows.conj()).real


def _numba_impls():
    import numba

    @numba.njit(cache=True)
    def nb_cumtrapz(y, x):
        out = np.empty_like(y)
        out[0] = 0.0
        acc = 0.0
        for i in range(1, y.shape[0]):
            acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1])
            out[i] = acc
        return out

    @numba.njit(cache=True)
    def nb_row_power(flat):
        out = np.empty(flat.shape[0])
        for i in range(flat.shape[0]):
            acc = 0.0
            for j in range(flat.shape[1]):
                v = flat[i, j]
                acc += v.real * v.real + v.imag * v.imag
            out[i] = acc
        return out

    def cumtrapz(y, x):
        return nb_cumtrapz(np.ascontiguousarray(y), np.ascontiguousarray(x))

    def row_power(flat):
        return nb_row_power(np.ascontiguousarray(flat))

    return {"cumtrapz": cumtrapz, "row_power": row_power}


_NUMPY_IMPLS = {"cumtrapz": _numpy_cumtrapz, "row_power": _numpy_row_power}
_active_name = None
_active = _NUMPY_IMPLS


def set_backend(name):
    """Select the kernel backend, "numba" or "numpy"."""
    global _active_name, _active
    if name == "numpy":
        _active = _NUMPY_IMPLS
    elif name == "numba":
        try:
            _active = _numba_impls()
        except ImportError as exc:
            raise ConfigError("numba backend requested but numba is not importable") from exc
    else:
        raise ConfigError(f"unknown kernel backend {name!r} (use 'numba' or 'numpy')")
    _active_name = name


def active_backend():
    return _active_name


def _init_from_env():
    requested = os.environ.get(ENV_VAR)
    if requested is not None:
        set_backend(requested)
        return
    try:
        set_backend("numba")
    except ConfigError:
        set_backend("numpy")


def cumtrapz(y, x):
    """Cumulative trapezoid integral of y over x, starting at zero."""
    return _active["cumtrapz"](np.asarray(y, dtype=float), np.asarray(x, dtype=float))


def row_power(rows):
    """Sum of |component|^2 along the last axis of a complex array."""
    arr = np.asarray(rows)
    flat = arr.reshape(-1, arr.shape[-1]).astype(np.complex128, copy=False)
    return _active["row_power"](flat).reshape(arr.shape[:-1])


_init_from_env()
