"""Tensor-grid phase summation kernels.

The hot loop sums, over an n-dimensional tensor grid of radial nodes,

    prod_j pw_j[i_j] * radial(sum_j s_j[i_j]),

where pw already folds quadrature weights, separable exponential factors and
oscillatory phases, and ``radial`` is a cutoff profile given as a uniform
lookup table (the only non-separable factor).  Compiled with numba when it
imports; set EQUILOC_DISABLE_NUMBA=1 before import to force the pure numpy
path.  Both paths are deterministic, so repeated runs on one backend agree
bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

_disabled = bool(os.environ.get("EQUILOC_DISABLE_NUMBA"))
try:
    if _disabled:
        raise ImportError("numba disabled by EQUILOC_DISABLE_NUMBA")
    from numba import njit as _njit

    _have_numba = True
except ImportError:
    _have_numba = False


def backend() -> str:
    return "numba" if _have_numba else "numpy"


def _interp_table(t2, table, lo, dt):
    u = (t2 - lo) / dt
    if u <= 0.0:
        return table[0]
    i = int(u)
    if i >= table.size - 1:
        return table[table.size - 1]
    frac = u - i
    return table[i] + frac * (table[i + 1] - table[i])


def _odometer(s_flat, pw_flat, offs, table, lo, dt):
    n = offs.size - 1
    counts = np.empty(n, dtype=np.int64)
    total = 1
    for j in range(n):
        counts[j] = offs[j + 1] - offs[j]
        total *= counts[j]
    acc = 0.0 + 0.0j
    for flat in range(total):
        rem = flat
        t2 = 0.0
        prod = 1.0 + 0.0j
        for j in range(n - 1, -1, -1):
            i = rem % counts[j]
            rem //= counts[j]
            t2 += s_flat[offs[j] + i]
            prod *= pw_flat[offs[j] + i]
        acc += prod * _interp_table(t2, table, lo, dt)
    return acc


if _have_numba:
    _interp_table = _njit(cache=True)(_interp_table)
    _odometer_compiled = _njit(cache=True)(_odometer)
else:
    _odometer_compiled = None


def radial_phase_sum_numpy(s_flat, pw_flat, offs, table, lo, dt) -> complex:
    """Vectorized reference path; chunks the leading axis to bound memory."""
    n = offs.size - 1
    s_axes = [s_flat[offs[j]:offs[j + 1]] for j in range(n)]
    pw_axes = [pw_flat[offs[j]:offs[j + 1]] for j in range(n)]
    xp = lo + dt * np.arange(table.size)

    def block(s0, pw0):
        t2 = s0
        pw = pw0
        for j in range(1, n):
            t2 = t2[..., None] + s_axes[j]
            pw = pw[..., None] * pw_axes[j]
        vals = np.interp(t2.ravel(), xp, table).reshape(t2.shape)
        return complex(np.sum(pw * vals))

    inner = 1
    for j in range(1, n):
        inner *= s_axes[j].size
    step = max(1, (1 << 22) // max(inner, 1))
    acc = 0j
    for start in range(0, s_axes[0].size, step):
        sl = slice(start, start + step)
        acc += block(s_axes[0][sl], pw_axes[0][sl])
    return acc


def radial_phase_sum(s_flat, pw_flat, offs, table, lo, dt) -> complex:
    s_flat = np.ascontiguousarray(s_flat, dtype=np.float64)
    pw_flat = np.ascontiguousarray(pw_flat, dtype=np.complex128)
    offs = np.ascontiguousarray(offs, dtype=np.int64)
    table = np.ascontiguousarray(table, dtype=np.float64)
    if _have_numba:
        return complex(_odometer_compiled(s_flat, pw_flat, offs, table,
                                          float(lo), float(dt)))
    return radial_phase_sum_numpy(s_flat, pw_flat, offs, table, lo, dt)
