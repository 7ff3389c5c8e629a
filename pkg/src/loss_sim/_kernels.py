"""Compiled line sweeps for batched spline fits.

Every kernel takes arrays in an ``(A, n, B)`` layout and sweeps along axis 1;
axes 0 and 2 enumerate independent lines.  Callers build these views with
:func:`line_view` so no data is copied.  Coefficient buffers use the +1 index
offset: ``c[k]`` holds the coefficient of ``B_{k-1}``.

Each sweep comes in two flavours with identical arithmetic: ``*_lines``
walks one line at a time (best when axis 1 is the contiguous one) and
``*_batched`` advances all ``B`` lines together so the innermost loop runs
over contiguous memory.  :func:`natural_derivative` and friends pick one.
"""

import numpy as np
from numba import njit


def line_view(arr, axis):
    """Return a view of ``arr`` with ``axis`` moved to position 1 of a 3-D shape."""
    if arr.ndim == 1:
        return arr[None, :, None]
    if arr.ndim == 2:
        return arr[None, :, :] if axis == 0 else arr[:, :, None]
    if arr.ndim == 3:
        if axis == 0:
            return arr.transpose(1, 0, 2)
        if axis == 1:
            return arr
        return arr.transpose(0, 2, 1)
    raise ValueError(f"unsupported array rank {arr.ndim}")


def lateral_view(arr, axis):
    """View of an array lacking ``axis`` shaped as the ``(A, B)`` part of :func:`line_view`."""
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr[None, :] if axis == 0 else arr[:, None]
    if arr.ndim == 2:
        return arr
    raise ValueError(f"unsupported lateral rank {arr.ndim}")


def thomas_factors(n_interior):
    """Forward-elimination multipliers for the (1, 4, 1) interior rows."""
    cp = np.empty(max(n_interior, 1))
    cp[0] = 0.25
    for i in range(1, n_interior):
        cp[i] = 1.0 / (4.0 - cp[i - 1])
    return cp


def _use_batched(v):
    return v.shape[2] > 1 and v.strides[2] == v.itemsize


# ---------------------------------------------------------------------------
# natural end conditions


@njit(cache=True, nogil=True)
def _natural_line(v, a, b, cp, c):
    n = v.shape[1] - 1
    c[1] = v[a, 0, b]
    c[n + 1] = v[a, n, b]
    # interior unknowns 1..n-1 with known end values folded into the rhs
    prev = 0.0
    for i in range(1, n):
        r = 6.0 * v[a, i, b]
        if i == 1:
            r -= c[1]
        if i == n - 1:
            r -= c[n + 1]
        prev = (r - prev) * cp[i - 1]
        c[i + 1] = prev
    for i in range(n - 2, 0, -1):
        c[i + 1] -= cp[i - 1] * c[i + 2]
    c[0] = 2.0 * c[1] - c[2]
    c[n + 2] = 2.0 * c[n + 1] - c[n]


@njit(cache=True, nogil=True)
def _natural_batch(v, a, cp, c):
    n = v.shape[1] - 1
    nb = v.shape[2]
    for b in range(nb):
        c[1, b] = v[a, 0, b]
        c[n + 1, b] = v[a, n, b]
    for i in range(1, n):
        f = cp[i - 1]
        for b in range(nb):
            r = 6.0 * v[a, i, b]
            if i == 1:
                r -= c[1, b]
            if i == n - 1:
                r -= c[n + 1, b]
            prev = c[i, b] if i > 1 else 0.0
            c[i + 1, b] = (r - prev) * f
    for i in range(n - 2, 0, -1):
        f = cp[i - 1]
        for b in range(nb):
            c[i + 1, b] -= f * c[i + 2, b]
    for b in range(nb):
        c[0, b] = 2.0 * c[1, b] - c[2, b]
        c[n + 2, b] = 2.0 * c[n + 1, b] - c[n, b]


@njit(cache=True, nogil=True)
def natural_coeffs(v, cp, out):
    A, n1, B = v.shape
    c = np.empty(n1 + 2)
    for a in range(A):
        for b in range(B):
            _natural_line(v, a, b, cp, c)
            for k in range(n1 + 2):
                out[a, k, b] = c[k]


@njit(cache=True, nogil=True)
def natural_derivative_lines(v, cp, inv2h, out):
    A, n1, B = v.shape
    c = np.empty(n1 + 2)
    for a in range(A):
        for b in range(B):
            _natural_line(v, a, b, cp, c)
            for i in range(n1):
                out[a, i, b] = (c[i + 2] - c[i]) * inv2h


@njit(cache=True, nogil=True)
def natural_derivative_batched(v, cp, inv2h, out):
    A, n1, B = v.shape
    c = np.empty((n1 + 2, B))
    for a in range(A):
        _natural_batch(v, a, cp, c)
        for i in range(n1):
            for b in range(B):
                out[a, i, b] = (c[i + 2, b] - c[i, b]) * inv2h


def natural_derivative(v, cp, inv2h, out):
    if _use_batched(v):
        natural_derivative_batched(v, cp, inv2h, out)
    else:
        natural_derivative_lines(v, cp, inv2h, out)


# ---------------------------------------------------------------------------
# Hermite end conditions (patch-local systems)


@njit(cache=True, nogil=True)
def _hermite_line(v, a, b, phi_l, phi_r, lf, df, h, y):
    # explicit L sweep, then U back substitution, in place in y
    m = v.shape[1] - 1
    y[0] = phi_l
    y[1] = v[a, 0, b] + (h / 3.0) * y[0]
    for r in range(2, m + 2):
        y[r] = v[a, r - 1, b] - lf[r - 1] * y[r - 1]
    y[m + 2] = phi_r + (3.0 * lf[m] / h) * y[m] - (3.0 * lf[m + 1] / h) * y[m + 1]
    y[m + 2] = 2.0 * h * y[m + 2] / df[m + 2]
    y[m + 1] = (6.0 * y[m + 1] - y[m + 2]) / df[m + 1]
    for r in range(m, 1, -1):
        y[r] = (6.0 * y[r] - y[r + 1]) / df[r]
    y[1] = (6.0 * y[1] - 2.0 * y[2]) / df[1]
    y[0] = y[2] - 2.0 * h * phi_l


@njit(cache=True, nogil=True)
def _hermite_batch(v, a, phi_l, phi_r, lf, df, h, y):
    m = v.shape[1] - 1
    nb = v.shape[2]
    for b in range(nb):
        y[0, b] = phi_l[a, b]
        y[1, b] = v[a, 0, b] + (h / 3.0) * y[0, b]
    for r in range(2, m + 2):
        f = lf[r - 1]
        for b in range(nb):
            y[r, b] = v[a, r - 1, b] - f * y[r - 1, b]
    for b in range(nb):
        t = phi_r[a, b] + (3.0 * lf[m] / h) * y[m, b] - (3.0 * lf[m + 1] / h) * y[m + 1, b]
        y[m + 2, b] = 2.0 * h * t / df[m + 2]
        y[m + 1, b] = (6.0 * y[m + 1, b] - y[m + 2, b]) / df[m + 1]
    for r in range(m, 1, -1):
        f = df[r]
        for b in range(nb):
            y[r, b] = (6.0 * y[r, b] - y[r + 1, b]) / f
    for b in range(nb):
        y[1, b] = (6.0 * y[1, b] - 2.0 * y[2, b]) / df[1]
        y[0, b] = y[2, b] - 2.0 * h * phi_l[a, b]


@njit(cache=True, nogil=True)
def hermite_coeffs(v, phi_l, phi_r, lf, df, h, out):
    A, m1, B = v.shape
    y = np.empty(m1 + 2)
    for a in range(A):
        for b in range(B):
            _hermite_line(v, a, b, phi_l[a, b], phi_r[a, b], lf, df, h, y)
            for k in range(m1 + 2):
                out[a, k, b] = y[k]


@njit(cache=True, nogil=True)
def hermite_derivative_lines(v, phi_l, phi_r, lf, df, h, out):
    A, m1, B = v.shape
    y = np.empty(m1 + 2)
    inv2h = 0.5 / h
    for a in range(A):
        for b in range(B):
            _hermite_line(v, a, b, phi_l[a, b], phi_r[a, b], lf, df, h, y)
            # the end slopes are the Hermite data themselves
            out[a, 0, b] = phi_l[a, b]
            for i in range(1, m1 - 1):
                out[a, i, b] = (y[i + 2] - y[i]) * inv2h
            out[a, m1 - 1, b] = phi_r[a, b]


@njit(cache=True, nogil=True)
def hermite_derivative_batched(v, phi_l, phi_r, lf, df, h, out):
    A, m1, B = v.shape
    y = np.empty((m1 + 2, B))
    inv2h = 0.5 / h
    for a in range(A):
        _hermite_batch(v, a, phi_l, phi_r, lf, df, h, y)
        for b in range(B):
            out[a, 0, b] = phi_l[a, b]
        for i in range(1, m1 - 1):
            for b in range(B):
                out[a, i, b] = (y[i + 2, b] - y[i, b]) * inv2h
        for b in range(B):
            out[a, m1 - 1, b] = phi_r[a, b]


def hermite_derivative(v, phi_l, phi_r, lf, df, h, out):
    if _use_batched(v):
        hermite_derivative_batched(v, phi_l, phi_r, lf, df, h, out)
    else:
        hermite_derivative_lines(v, phi_l, phi_r, lf, df, h, out)
