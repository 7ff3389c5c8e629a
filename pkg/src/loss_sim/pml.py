"""ADE-PML absorbing layers for the 2-D acoustic system.

The stretched derivative ``(1/s) d/dx`` with ``s = k + d/(alpha + i w)`` is
written as ``(1/k) d/dx + psi`` where the memory variable obeys the local ODE

    psi' = -(d/k + alpha) psi - (d/k^2) g,     g = d/dx of the frozen field.

Inside a Strang sub-step the gradient ``g`` is frozen, so both the memory
variable and the field it feeds have closed-form flows; those are what
:func:`exp_euler_memory_update` and :func:`exact_flow_velocity_update` return.

Layers sit on the outer ``L`` cells of an axis.  Memory variables are only
stored on the knots of those slabs; elsewhere they are identically zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, DomainError
from .physics import WavefieldSet2D
from .spline_core import Grid1D


@dataclass(frozen=True)
class AxisProfile:
    """Damping ``d``, stretching ``k`` and frequency shift ``alpha`` on one axis."""

    d: NDArray[np.float64]
    k: NDArray[np.float64]
    alpha: NDArray[np.float64]
    l_cells: int = 0
    R: float = 1.0
    k_max: float = 1.0
    alpha_max: float = 0.0
    d0: float = 0.0
    m: float = 1.0
    p_exp: float = 1.0

    def __post_init__(self):
        if not (self.d.shape == self.k.shape == self.alpha.shape) or self.d.ndim != 1:
            raise DimensionError("profile arrays must be 1-D and equally long")
        if np.any(self.k < 1.0) or np.any(self.d < 0.0) or np.any(self.alpha < 0.0):
            raise DomainError("profile needs d >= 0, k >= 1, alpha >= 0")

    @property
    def beta(self):
        return self.d / self.k + self.alpha

    @property
    def active(self) -> bool:
        return bool(np.any(self.beta > 0.0))

    @property
    def slabs(self) -> list[tuple[int, int]]:
        """Half-open knot ranges at the two ends where memory dynamics are active.

        Knots strictly between the slabs must be transparent (``d = 0``,
        ``k = 1``, ``alpha = 0``); anything else is rejected.
        """
        live = self.beta > 0.0
        n1 = live.size
        if not live.any():
            return []
        lo = 0
        while lo < n1 and live[lo]:
            lo += 1
        hi = n1
        while hi > lo and live[hi - 1]:
            hi -= 1
        mid = slice(lo, hi)
        if live[mid].any() or np.any(self.k[mid] != 1.0):
            raise DomainError("profile has absorbing knots away from the axis ends")
        out = []
        if lo > 0:
            out.append((0, lo))
        if hi < n1:
            out.append((hi, n1))
        return out

    @classmethod
    def transparent(cls, n_knots: int) -> "AxisProfile":
        return cls(np.zeros(n_knots), np.ones(n_knots), np.zeros(n_knots))


PmlProfile = tuple[AxisProfile, ...]


def damping_d0(c_pmax: float, R: float, l_phys: float) -> float:
    """Peak damping ``-3 c ln(R) / (2 L)`` for a layer of physical thickness ``l_phys``."""
    return -3.0 * c_pmax * math.log(R) / (2.0 * l_phys)


def layer_depth(n_knots: int, l_cells: int) -> NDArray[np.float64]:
    """Normalized depth in ``[0, 1]`` per knot, NaN on interior knots."""
    depth = np.full(n_knots, np.nan)
    i = np.arange(l_cells + 1)
    depth[: l_cells + 1] = (l_cells - i) / l_cells
    depth[n_knots - 1 - l_cells :] = i / l_cells
    return depth


def build_profile(
    grid: Grid1D,
    l_cells: int,
    R: float = 1e-6,
    k_max: float = 1.0,
    f0: float = 1.0,
    c_pmax: float = 1.0,
    m: float = 1.0,
    p_exp: float = 1.0,
) -> AxisProfile:
    """Graded layer of ``l_cells`` cells at both ends of ``grid``.

    ``d = d0 s^2``, ``k = 1 + (k_max - 1) s^m`` and
    ``alpha = alpha_max (1 - s)^p_exp`` with ``s`` the normalized depth and
    ``alpha_max = pi f0``.
    """
    if l_cells < 1:
        raise DomainError(f"layer needs at least one cell, got {l_cells}")
    if not 0.0 < R < 1.0:
        raise DomainError(f"reflection coefficient must lie in (0, 1), got {R}")
    if k_max < 1.0:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    if f0 <= 0.0:
        raise DomainError(f"f0 must be positive, got {f0}")
    if c_pmax <= 0.0:
        raise DomainError(f"c_pmax must be positive, got {c_pmax}")
    if 2 * l_cells > grid.n:
        raise DomainError(f"layer of {l_cells} cells is wider than half of the {grid.n}-cell axis")
    n1 = grid.n + 1
    d0 = damping_d0(c_pmax, R, l_cells * grid.h)
    alpha_max = math.pi * f0
    depth = layer_depth(n1, l_cells)
    inside = ~np.isnan(depth)
    s = depth[inside]
    d = np.zeros(n1)
    k = np.ones(n1)
    alpha = np.zeros(n1)
    d[inside] = d0 * s**2
    k[inside] = 1.0 + (k_max - 1.0) * s**m
    alpha[inside] = alpha_max * (1.0 - s) ** p_exp
    return AxisProfile(d, k, alpha, l_cells, R, k_max, alpha_max, d0, m, p_exp)


def dump_profile(profile: AxisProfile) -> str:
    lines = ["knot d k alpha"]
    for i, (d, k, a) in enumerate(zip(profile.d, profile.k, profile.alpha)):
        lines.append(f"{i} {d:.17e} {k:.17e} {a:.17e}")
    return "\n".join(lines) + "\n"


def exp_euler_memory_update(psi, g, d, k, alpha, dt):
    """Exact flow of ``psi' = -(d/k + alpha) psi - (d/k^2) g`` over ``dt`` with ``g`` frozen."""
    beta = d / k + alpha
    if np.any(np.asarray(beta) <= 0.0):
        raise DomainError("memory update requested where d/k + alpha = 0")
    decay = np.exp(-beta * dt)
    gain = -np.expm1(-beta * dt) / beta
    return decay * psi - (d / (k * k)) * gain * g


def exact_flow_velocity_update(v, psi_old, psi_new, g, rho, d, k, alpha, dt):
    """Field update ``rho v' = -(1/k) g - psi`` integrated exactly with ``g`` frozen.

    Where ``d + alpha k = 0`` this degenerates to ``v - dt g / (rho k)``.
    """
    denom = d + alpha * k
    live = np.asarray(denom) > 0.0
    safe = np.where(live, denom, 1.0)
    layer = v + (1.0 / rho) * (k / safe) * (psi_new - psi_old) - (dt / rho) * (alpha / safe) * g
    limit = v - (dt / rho) * (g / k)
    out = np.where(live, layer, limit)
    return float(out) if np.ndim(out) == 0 else out


def _axis_slice(ndim: int, axis: int, lo: int, hi: int):
    idx = [slice(None)] * ndim
    idx[axis] = slice(lo, hi)
    return tuple(idx)


def _along(values, axis: int, ndim: int):
    shape = [1] * ndim
    shape[axis] = values.size
    return values.reshape(shape)


@dataclass
class PmlState:
    """Memory variables stored slab by slab.

    ``psi[a][s]`` pairs with the stress gradient along axis ``a`` and
    ``phi[a][s]`` with the velocity gradient, on slab ``s`` of that axis.
    """

    shape: tuple[int, ...]
    slabs: dict[int, list[tuple[int, int]]]
    psi: dict[int, list[NDArray[np.float64]]] = field(default_factory=dict)
    phi: dict[int, list[NDArray[np.float64]]] = field(default_factory=dict)

    @classmethod
    def zeros(cls, profiles: Sequence[AxisProfile], shape) -> "PmlState":
        shape = tuple(shape)
        if len(profiles) != len(shape):
            raise DimensionError(f"{len(profiles)} profiles for a {len(shape)}-D grid")
        slabs, psi, phi = {}, {}, {}
        for a, prof in enumerate(profiles):
            if prof.d.size != shape[a]:
                raise DimensionError(f"axis {a} profile has {prof.d.size} knots, grid has {shape[a]}")
            slabs[a] = prof.slabs
            dims = [list(shape) for _ in slabs[a]]
            for dm, (lo, hi) in zip(dims, slabs[a]):
                dm[a] = hi - lo
            psi[a] = [np.zeros(dm) for dm in dims]
            phi[a] = [np.zeros(dm) for dm in dims]
        return cls(shape, slabs, psi, phi)

    @property
    def stored_knots(self) -> int:
        return sum(arr.size for arrs in (self.psi, self.phi) for lst in arrs.values() for arr in lst)


def _increment(profile: AxisProfile, axis, mem, g, dt, lo, hi, ndim):
    # exact-flow increment and new memory on one slab, without the 1/rho factor
    d = _along(profile.d[lo:hi], axis, ndim)
    k = _along(profile.k[lo:hi], axis, ndim)
    a = _along(profile.alpha[lo:hi], axis, ndim)
    new = exp_euler_memory_update(mem, g, d, k, a, dt)
    denom = d + a * k
    return (k / denom) * (new - mem) - dt * (a / denom) * g, new


def _sliced(value, idx):
    return value[idx] if np.ndim(value) else value


def subsystem_A_step(
    fields2d: WavefieldSet2D,
    state: PmlState,
    profiles: Sequence[AxisProfile],
    dt: float,
    rho,
    dsigma_dx,
    dsigma_dz,
) -> WavefieldSet2D:
    """Velocity half of the split system with stress gradients frozen.

    Updates ``v1`` (x-profile, ``psi[0]``) and ``v3`` (z-profile, ``psi[1]``)
    in place and returns ``fields2d``.
    """
    for axis, (name, g) in enumerate((("v1", dsigma_dx), ("v3", dsigma_dz))):
        prof = profiles[axis]
        v = getattr(fields2d, name)
        k = _along(prof.k, axis, 2)
        new_v = v - (dt / rho) * (g / k)
        for s, (lo, hi) in enumerate(state.slabs[axis]):
            idx = _axis_slice(2, axis, lo, hi)
            inc, state.psi[axis][s] = _increment(prof, axis, state.psi[axis][s], g[idx], dt, lo, hi, 2)
            new_v[idx] = v[idx] + (1.0 / _sliced(rho, idx)) * inc
        setattr(fields2d, name, new_v)
    return fields2d


def subsystem_B_step(
    fields2d: WavefieldSet2D,
    state: PmlState,
    profiles: Sequence[AxisProfile],
    dt: float,
    modulus,
    dv1_dx,
    dv3_dz,
) -> WavefieldSet2D:
    """Stress half of the split system with velocity gradients frozen.

    ``modulus`` is ``rho c_P^2``.  Knots inside any layer get the sum of the
    two per-axis exact-flow increments; the rest take the plain update.
    """
    kx = _along(profiles[0].k, 0, 2)
    kz = _along(profiles[1].k, 1, 2)
    sigma = fields2d.sigma
    new_sigma = sigma - (dt * modulus) * (dv1_dx / kx + dv3_dz / kz)
    if state.slabs[0] or state.slabs[1]:
        incs = []
        for axis, g in enumerate((dv1_dx, dv3_dz)):
            k = kx if axis == 0 else kz
            inc = -dt * (g / k)
            for s, (lo, hi) in enumerate(state.slabs[axis]):
                idx = _axis_slice(2, axis, lo, hi)
                inc[idx], state.phi[axis][s] = _increment(
                    profiles[axis], axis, state.phi[axis][s], g[idx], dt, lo, hi, 2
                )
            incs.append(inc)
        for axis in (0, 1):
            for lo, hi in state.slabs[axis]:
                idx = _axis_slice(2, axis, lo, hi)
                new_sigma[idx] = sigma[idx] + _sliced(modulus, idx) * (incs[0][idx] + incs[1][idx])
    fields2d.sigma = new_sigma
    return fields2d
