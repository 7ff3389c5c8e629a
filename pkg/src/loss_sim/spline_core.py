"""Uniform-grid cubic B-splines with natural end conditions.

Coefficients are stored 0-based: ``values[k]`` is the coefficient of
``B_{k-1}``, so the spline over ``N`` intervals carries ``N + 3`` entries
``B_{-1} .. B_{N+1}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import _kernels
from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class Grid1D:
    """Uniform knot grid ``x_min + i*h`` for ``i = 0..n``."""

    x_min: float
    x_max: float
    n: int

    def __post_init__(self):
        if self.n < 4:
            raise DimensionError(f"need at least 4 intervals, got {self.n}")
        if not self.x_max > self.x_min:
            raise DomainError(f"empty interval [{self.x_min}, {self.x_max}]")

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n

    @property
    def knots(self) -> NDArray[np.float64]:
        return self.x_min + np.arange(self.n + 1) * self.h

    def knot(self, i: int) -> float:
        return self.x_min + i * self.h


@dataclass
class SplineCoefficients:
    values: NDArray[np.float64]
    grid: Grid1D

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n + 3,):
            raise DimensionError(
                f"expected {self.grid.n + 3} coefficients, got {self.values.shape}"
            )

    def coef(self, i: int) -> float:
        """Coefficient of ``B_i`` for ``i`` in ``-1..N+1``."""
        return float(self.values[i + 1])


def _basis_local(t):
    # four cubic pieces of B_i in the local variable t = (x - x_i)/h
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    s = t + 2.0  # x in [x_{i-2}, x_{i-1}]
    m = (t >= -2.0) & (t < -1.0)
    out[m] = s[m] ** 3 / 6.0
    s = t + 1.0
    m = (t >= -1.0) & (t < 0.0)
    out[m] = -s[m] ** 3 / 2.0 + s[m] ** 2 / 2.0 + s[m] / 2.0 + 1.0 / 6.0
    s = 1.0 - t
    m = (t >= 0.0) & (t < 1.0)
    out[m] = -s[m] ** 3 / 2.0 + s[m] ** 2 / 2.0 + s[m] / 2.0 + 1.0 / 6.0
    s = 2.0 - t
    m = (t >= 1.0) & (t <= 2.0)
    out[m] = s[m] ** 3 / 6.0
    return out


def _basis_derivative_local(t, h):
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    s = t + 2.0
    m = (t >= -2.0) & (t < -1.0)
    out[m] = s[m] ** 2 / (2.0 * h)
    s = t + 1.0
    m = (t >= -1.0) & (t < 0.0)
    out[m] = (-1.5 * s[m] ** 2 + s[m] + 0.5) / h
    s = 1.0 - t
    m = (t >= 0.0) & (t < 1.0)
    out[m] = (1.5 * s[m] ** 2 - s[m] - 0.5) / h
    s = 2.0 - t
    m = (t >= 1.0) & (t <= 2.0)
    out[m] = -s[m] ** 2 / (2.0 * h)
    return out


def eval_basis(i: int, x: ArrayLike, grid: Grid1D):
    """Value of ``B_i`` at ``x``; zero outside ``[x_{i-2}, x_{i+2}]``."""
    t = (np.asarray(x, dtype=np.float64) - grid.knot(i)) / grid.h
    out = _basis_local(t)
    return float(out) if out.ndim == 0 else out


def eval_basis_derivative(i: int, x: ArrayLike, grid: Grid1D):
    """Value of ``dB_i/dx`` at ``x``."""
    t = (np.asarray(x, dtype=np.float64) - grid.knot(i)) / grid.h
    out = _basis_derivative_local(t, grid.h)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=64)
def _interior_factors(n: int) -> NDArray[np.float64]:
    cp = _kernels.thomas_factors(n - 1)
    cp.setflags(write=False)
    return cp


def fit_global(samples: ArrayLike, grid: Grid1D) -> SplineCoefficients:
    """Interpolating spline with zero second derivative at both ends.

    The two natural-closure rows fix the end coefficients to the end samples,
    which leaves a strictly diagonally dominant (1, 4, 1) system for the
    interior that is swept in O(N) without pivoting.
    """
    v = np.ascontiguousarray(samples, dtype=np.float64)
    if v.shape != (grid.n + 1,):
        raise DimensionError(f"expected {grid.n + 1} samples, got {v.shape}")
    out = np.empty(grid.n + 3)
    _kernels.natural_coeffs(
        _kernels.line_view(v, 0), _interior_factors(grid.n), _kernels.line_view(out, 0)
    )
    return SplineCoefficients(out, grid)


def derivative_at_knots(coeffs: SplineCoefficients) -> NDArray[np.float64]:
    c = coeffs.values
    return (c[2:] - c[:-2]) / (2.0 * coeffs.grid.h)


def eval_spline(coeffs: SplineCoefficients, x: ArrayLike):
    grid = coeffs.grid
    xa = np.asarray(x, dtype=np.float64)
    tol = 1e-12 * max(abs(grid.x_min), abs(grid.x_max), grid.h)
    if np.any(xa < grid.x_min - tol) or np.any(xa > grid.x_max + tol):
        raise DomainError(f"x outside [{grid.x_min}, {grid.x_max}]")
    u = (xa - grid.x_min) / grid.h
    j = np.clip(np.floor(u).astype(np.int64), 0, grid.n - 1)
    total = np.zeros_like(xa)
    for shift in (-1, 0, 1, 2):
        i = j + shift
        total = total + coeffs.values[i + 1] * _basis_local(u - i)
    return float(total) if total.ndim == 0 else total


def resample_matrix(grid: Grid1D, points: ArrayLike) -> NDArray[np.float64]:
    """Matrix taking the ``N + 1`` knot samples to spline values at ``points``."""
    n1 = grid.n + 1
    eye = np.eye(n1)
    coeffs = np.empty((n1 + 2, n1))
    # one natural fit per identity column, batched along axis 1
    _kernels.natural_coeffs(eye[None, :, :], _interior_factors(grid.n), coeffs[None, :, :])
    pts = np.asarray(points, dtype=np.float64)
    tol = 1e-12 * max(abs(grid.x_min), abs(grid.x_max), grid.h)
    if np.any(pts < grid.x_min - tol) or np.any(pts > grid.x_max + tol):
        raise DomainError(f"points outside [{grid.x_min}, {grid.x_max}]")
    u = (pts - grid.x_min) / grid.h
    j = np.clip(np.floor(u).astype(np.int64), 0, grid.n - 1)
    basis = np.zeros((pts.size, n1 + 2))
    rows = np.arange(pts.size)
    for shift in (-1, 0, 1, 2):
        i = j + shift
        basis[rows, i + 1] += _basis_local(u - i)
    return basis @ coeffs


def derivative_along(field: NDArray[np.float64], axis: int, grid: Grid1D, out=None):
    """Knot derivative of every grid line of ``field`` along ``axis`` (global spline)."""
    f = np.asarray(field, dtype=np.float64)
    if f.shape[axis] != grid.n + 1:
        raise DimensionError(f"axis {axis} has {f.shape[axis]} knots, grid has {grid.n + 1}")
    if out is None:
        out = np.empty_like(f)
    _kernels.natural_derivative(
        _kernels.line_view(f, axis),
        _interior_factors(grid.n),
        0.5 / grid.h,
        _kernels.line_view(out, axis),
    )
    return out


class GlobalSplineDerivative:
    """Derivative provider backed by one global natural spline per grid line."""

    def __init__(self, grids):
        self.grids = tuple(grids)

    def __call__(self, field, axis, out=None):
        return derivative_along(field, axis, self.grids[axis], out=out)
