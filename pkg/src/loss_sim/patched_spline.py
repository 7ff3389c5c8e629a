"""Patch-local spline fits glued by truncated inverse-row boundary slopes.

A line of ``N + 1`` knots is cut into ``p`` patches of ``M = N/p`` intervals
that share their junction knots.  Each patch solves a Hermite-closed local
system whose end slopes are assembled from the rows ``lM - 1`` and ``lM + 1``
of the global coefficient-matrix inverse, truncated to ``n_nb`` neighbours on
either side of the junction.  The slope at junction ``l`` splits into a half
computed from the left patch's samples and a half from the right patch's, so
adjacent patches exchange exactly one scalar per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_banded

from . import _kernels
from .errors import DimensionError, DomainError, LayoutError
from .spline_core import Grid1D, SplineCoefficients, derivative_along, fit_global

#: decay factor of the (1, 4, 1) inverse away from the diagonal
DECAY_RATE = 2.0 - math.sqrt(3.0)


@dataclass(frozen=True)
class PatchLayout1D:
    n: int
    p: int
    n_nb: int

    def __post_init__(self):
        if self.p < 1:
            raise LayoutError(f"patch count must be positive, got {self.p}")
        if self.n_nb < 1:
            raise LayoutError(f"n_nb must be at least 1, got {self.n_nb}")
        if self.n % self.p:
            raise LayoutError(f"{self.n} intervals do not split into {self.p} equal patches")
        if self.p > 1 and self.m < self.n_nb + 2:
            raise LayoutError(
                f"patch width M={self.m} is smaller than n_nb + 2 = {self.n_nb + 2}"
            )
        if self.p > 1 and self.m < 4:
            raise LayoutError(f"patch width M={self.m} below the minimum of 4")

    @property
    def m(self) -> int:
        return self.n // self.p

    @property
    def junctions(self) -> list[int]:
        return [l * self.m for l in range(1, self.p)]

    def patch_range(self, l: int) -> tuple[int, int]:
        """Inclusive knot range of patch ``l`` (0-based)."""
        return l * self.m, (l + 1) * self.m


def coefficient_matrix(grid: Grid1D) -> NDArray[np.float64]:
    """Dense ``(N+3) x (N+3)`` global collocation matrix with natural rows."""
    n = grid.n
    h2 = grid.h * grid.h
    a = np.zeros((n + 3, n + 3))
    a[0, :3] = [1.0 / h2, -2.0 / h2, 1.0 / h2]
    a[-1, -3:] = [1.0 / h2, -2.0 / h2, 1.0 / h2]
    for r in range(1, n + 2):
        a[r, r - 1 : r + 2] = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0]
    return a


def _transposed_band(grid: Grid1D) -> NDArray[np.float64]:
    # banded storage of A^T with two sub- and two super-diagonals
    a = coefficient_matrix(grid)
    at = a.T
    size = a.shape[0]
    ab = np.zeros((5, size))
    for r in range(size):
        for c in range(max(0, r - 2), min(size, r + 3)):
            ab[2 + r - c, c] = at[r, c]
    return ab


def compute_inverse_rows(grid: Grid1D, rows) -> dict[int, NDArray[np.float64]]:
    """Exact rows ``b_{i,-1..N+1}`` of the inverse global matrix.

    Row ``i`` solves ``A^T y = e_i``.  Keys and columns use the -1-based knot
    index, so ``out[i][j + 1] = b_{ij}``.
    """
    rows = sorted(set(int(r) for r in rows))
    for r in rows:
        if not -1 <= r <= grid.n + 1:
            raise DomainError(f"row {r} outside -1..{grid.n + 1}")
    if not rows:
        return {}
    rhs = np.zeros((grid.n + 3, len(rows)))
    for k, r in enumerate(rows):
        rhs[r + 1, k] = 1.0
    sol = solve_banded((2, 2), _transposed_band(grid), rhs)
    return {r: sol[:, k].copy() for k, r in enumerate(rows)}


@dataclass(frozen=True)
class PmbcStencil:
    """Junction and end-closure slope stencils for one axis.

    Arrays are indexed by junction ``l - 1`` for ``l = 1..p-1`` and by
    ``j - 1`` for ``j = 1..n_nb``; the end arrays by ``j = 0..n_nb``.
    """

    layout: PatchLayout1D
    h: float
    c0: NDArray[np.float64]
    c_minus: NDArray[np.float64]
    c_plus: NDArray[np.float64]
    c_left: NDArray[np.float64]
    c_right: NDArray[np.float64]


@lru_cache(maxsize=32)
def _normalized_stencils(n: int, p: int, n_nb: int):
    # b_{ij} on sample columns is h-independent, so build at h = 1 and scale
    layout = PatchLayout1D(n, p, n_nb)
    grid = Grid1D(0.0, float(n), n)
    m = layout.m
    wanted = {-1, 1, n - 1, n + 1}
    for l in range(1, p):
        wanted.update((l * m - 1, l * m + 1))
    b = compute_inverse_rows(grid, wanted)

    def bij(i, j):
        return b[i][j + 1]

    c0 = np.empty(p - 1)
    c_minus = np.empty((p - 1, n_nb))
    c_plus = np.empty((p - 1, n_nb))
    for l in range(1, p):
        lm = l * m
        c0[l - 1] = 0.5 * (-bij(lm - 1, lm) + bij(lm + 1, lm))
        for j in range(1, n_nb + 1):
            c_plus[l - 1, j - 1] = 0.5 * (-bij(lm - 1, lm + j) + bij(lm + 1, lm + j))
            c_minus[l - 1, j - 1] = 0.5 * (-bij(lm - 1, lm - j) + bij(lm + 1, lm - j))
    jj = np.arange(n_nb + 1)
    c_left = 0.5 * (-b[-1][jj + 1] + b[1][jj + 1])
    c_right = 0.5 * (-b[n - 1][n - jj + 1] + b[n + 1][n - jj + 1])
    for arr in (c0, c_minus, c_plus, c_left, c_right):
        arr.setflags(write=False)
    return c0, c_minus, c_plus, c_left, c_right


def build_pmbc_stencils(grid: Grid1D, layout: PatchLayout1D) -> PmbcStencil:
    if layout.n != grid.n:
        raise LayoutError(f"layout has {layout.n} intervals, grid has {grid.n}")
    if layout.n_nb > grid.n:
        raise LayoutError(f"n_nb={layout.n_nb} exceeds the grid size {grid.n}")
    c0, cm, cp, cl, cr = _normalized_stencils(layout.n, layout.p, layout.n_nb)
    inv_h = 1.0 / grid.h
    return PmbcStencil(layout, grid.h, c0 * inv_h, cm * inv_h, cp * inv_h, cl * inv_h, cr * inv_h)


def dump_stencils(stencil: PmbcStencil) -> str:
    """Diagnostic text table: junction, j, c_minus, c_plus.

    Junction 0 and ``p`` hold the end closures; row ``j = 0`` of an interior
    junction carries ``c0 / 2`` in both columns.
    """
    lay = stencil.layout
    lines = ["junction j c_minus c_plus"]
    for j in range(lay.n_nb + 1):
        lines.append(f"0 {j} {stencil.c_left[j]:.17e} nan")
    for l in range(1, lay.p):
        half = 0.5 * stencil.c0[l - 1]
        lines.append(f"{l} 0 {half:.17e} {half:.17e}")
        for j in range(1, lay.n_nb + 1):
            lines.append(
                f"{l} {j} {stencil.c_minus[l - 1, j - 1]:.17e} {stencil.c_plus[l - 1, j - 1]:.17e}"
            )
    for j in range(lay.n_nb + 1):
        lines.append(f"{lay.p} {j} nan {stencil.c_right[j]:.17e}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# local Hermite-closed systems


@dataclass(frozen=True)
class LocalSplineSystem:
    """Explicit LU factors of the Hermite-closed patch matrix.

    ``l_factors[i]`` is ``l_i`` for ``i = 1..M+1`` and ``d_factors[i]`` is
    ``d_i`` for ``i = 1..M+2``; index 0 is unused in both.
    """

    m: int
    h: float
    l_factors: NDArray[np.float64]
    d_factors: NDArray[np.float64]

    @classmethod
    def build(cls, m: int, h: float) -> "LocalSplineSystem":
        lf, df = _lu_factors(m)
        return cls(m, float(h), lf, df)


@lru_cache(maxsize=64)
def _lu_factors(m: int):
    if m < 2:
        raise LayoutError(f"local system needs M >= 2, got {m}")
    lf = np.zeros(m + 2)
    df = np.zeros(m + 3)
    df[1] = 4.0
    lf[1] = 0.25
    df[2] = 4.0 - 2.0 * lf[1]
    for i in range(2, m + 1):
        lf[i] = 1.0 / df[i]
        df[i + 1] = 4.0 - lf[i]
    lf[m + 1] = 1.0 / (df[m] * df[m + 1])
    df[m + 2] = 1.0 - lf[m + 1]
    lf.setflags(write=False)
    df.setflags(write=False)
    return lf, df


def local_matrix(m: int, h: float) -> NDArray[np.float64]:
    """Dense Hermite-closed patch matrix, for checking the explicit factors."""
    a = np.zeros((m + 3, m + 3))
    a[0, [0, 2]] = [-0.5 / h, 0.5 / h]
    a[-1, [m, m + 2]] = [-0.5 / h, 0.5 / h]
    for r in range(1, m + 2):
        a[r, r - 1 : r + 2] = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0]
    return a


def fit_local(
    samples: ArrayLike,
    phi_left: float,
    phi_right: float,
    system: LocalSplineSystem,
    x_min: float = 0.0,
) -> SplineCoefficients:
    v = np.ascontiguousarray(samples, dtype=np.float64)
    if v.shape != (system.m + 1,):
        raise DimensionError(f"expected {system.m + 1} samples, got {v.shape}")
    out = np.empty(system.m + 3)
    _kernels.hermite_coeffs(
        _kernels.line_view(v, 0),
        np.full((1, 1), float(phi_left)),
        np.full((1, 1), float(phi_right)),
        system.l_factors,
        system.d_factors,
        system.h,
        _kernels.line_view(out, 0),
    )
    grid = Grid1D(x_min, x_min + system.m * system.h, system.m)
    return SplineCoefficients(out, grid)


def hermite_derivative_along(block, axis, phi_left, phi_right, system, out=None):
    """Knot derivatives of a patch block whose end slopes along ``axis`` are given."""
    f = np.asarray(block, dtype=np.float64)
    if f.shape[axis] != system.m + 1:
        raise DimensionError(f"axis {axis} has {f.shape[axis]} knots, patch has {system.m + 1}")
    if out is None:
        out = np.empty_like(f)
    _kernels.hermite_derivative(
        _kernels.line_view(f, axis),
        _kernels.lateral_view(np.asarray(phi_left, dtype=np.float64), axis),
        _kernels.lateral_view(np.asarray(phi_right, dtype=np.float64), axis),
        system.l_factors,
        system.d_factors,
        system.h,
        _kernels.line_view(out, axis),
    )
    # the end slopes are the knot derivatives; writing them verbatim makes the
    # knot shared with a neighbour bitwise identical whichever patch lands last
    ends = [slice(None)] * f.ndim
    ends[axis] = 0
    out[tuple(ends)] = phi_left
    ends[axis] = -1
    out[tuple(ends)] = phi_right
    return out


# ---------------------------------------------------------------------------
# junction slopes


def _weighted(block, axis, start, weights):
    # sum_j weights[j] * block[start + j] along axis, accumulated in a fixed
    # order so every line rounds the same way whatever block it sits in
    lines = np.moveaxis(np.asarray(block, dtype=np.float64), axis, 0)
    acc = weights[0] * lines[start]
    for j in range(1, len(weights)):
        acc += weights[j] * lines[start + j]
    return acc


def _half_weights(stencil: PmbcStencil, l: int, side: str) -> NDArray[np.float64]:
    if side == "left":
        w = np.concatenate([stencil.c_minus[l - 1][::-1], [0.5 * stencil.c0[l - 1]]])
    elif side == "right":
        w = np.concatenate([[0.5 * stencil.c0[l - 1]], stencil.c_plus[l - 1]])
    elif side == "start":
        w = np.array(stencil.c_left, dtype=np.float64)
    else:
        w = np.array(stencil.c_right[::-1], dtype=np.float64)
    return w


def left_half(block, axis, stencil: PmbcStencil, l: int):
    """Half of the slope at junction ``l`` held by the patch on its left.

    ``block`` is that patch's data; the junction is its last knot along ``axis``.
    """
    m = block.shape[axis] - 1
    return _weighted(block, axis, m - stencil.layout.n_nb, _half_weights(stencil, l, "left"))


def right_half(block, axis, stencil: PmbcStencil, l: int):
    """Half of the slope at junction ``l`` held by the patch on its right."""
    return _weighted(block, axis, 0, _half_weights(stencil, l, "right"))


def left_end_slope(block, axis, stencil: PmbcStencil):
    return _weighted(block, axis, 0, _half_weights(stencil, 0, "start"))


def right_end_slope(block, axis, stencil: PmbcStencil):
    m = block.shape[axis] - 1
    return _weighted(block, axis, m - stencil.layout.n_nb, _half_weights(stencil, 0, "end"))


def junction_partial_sum(
    samples: ArrayLike, stencil: PmbcStencil, side: Literal["left", "right"], l: int
) -> float:
    """Scalar half-slope a patch contributes to junction ``l``.

    ``side="left"`` means the calling patch lies left of the junction and
    ``samples`` ends at the junction knot; ``side="right"`` means it starts there.
    """
    v = np.asarray(samples, dtype=np.float64)
    if not 1 <= l < stencil.layout.p:
        raise DomainError(f"junction {l} outside 1..{stencil.layout.p - 1}")
    if v.shape[0] < stencil.layout.n_nb + 1:
        raise DimensionError(
            f"need {stencil.layout.n_nb + 1} samples on the {side} of junction {l}, got {v.shape[0]}"
        )
    if side == "left":
        return float(left_half(v, 0, stencil, l))
    if side == "right":
        return float(right_half(v, 0, stencil, l))
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _patch_slopes(samples, layout: PatchLayout1D, stencil: PmbcStencil):
    blocks = []
    for l in range(layout.p):
        lo, hi = layout.patch_range(l)
        blocks.append(samples[lo : hi + 1])
    lefts = [left_half(blocks[l - 1], 0, stencil, l) for l in range(1, layout.p)]
    rights = [right_half(blocks[l], 0, stencil, l) for l in range(1, layout.p)]
    phi_l = [left_end_slope(blocks[0], 0, stencil)]
    phi_r = []
    for l in range(1, layout.p):
        # each side adds its own half first
        phi_r.append(lefts[l - 1] + rights[l - 1])
        phi_l.append(rights[l - 1] + lefts[l - 1])
    phi_r.append(right_end_slope(blocks[-1], 0, stencil))
    return blocks, phi_l, phi_r


def patched_coefficients(samples: ArrayLike, layout: PatchLayout1D, stencil: PmbcStencil):
    """Local coefficient arrays (length ``M + 3``) for every patch of a line."""
    v = np.asarray(samples, dtype=np.float64)
    if v.shape != (layout.n + 1,):
        raise DimensionError(f"expected {layout.n + 1} samples, got {v.shape}")
    if layout.p == 1:
        grid = Grid1D(0.0, layout.n * stencil.h, layout.n)
        return [fit_global(v, grid).values]
    system = LocalSplineSystem.build(layout.m, stencil.h)
    blocks, phi_l, phi_r = _patch_slopes(v, layout, stencil)
    return [
        fit_local(blocks[l], phi_l[l], phi_r[l], system).values for l in range(layout.p)
    ]


def patched_derivative_line(samples: ArrayLike, layout: PatchLayout1D, stencil: PmbcStencil):
    v = np.asarray(samples, dtype=np.float64)
    if v.shape != (layout.n + 1,):
        raise DimensionError(f"expected {layout.n + 1} samples, got {v.shape}")
    grid = Grid1D(0.0, layout.n * stencil.h, layout.n)
    if layout.p == 1:
        return derivative_along(v, 0, grid)
    system = LocalSplineSystem.build(layout.m, stencil.h)
    blocks, phi_l, phi_r = _patch_slopes(v, layout, stencil)
    out = np.empty(layout.n + 1)
    for l in range(layout.p):
        d = hermite_derivative_along(blocks[l], 0, phi_l[l], phi_r[l], system)
        lo, hi = layout.patch_range(l)
        if l > 0 and abs(out[lo] - d[0]) > 1e-13 * max(1.0, abs(d[0])):
            raise AssertionError(f"junction {l} derivative differs between patches")
        out[lo : hi + 1] = d
    return out
