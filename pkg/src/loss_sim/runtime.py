"""Patch decomposition, junction-scalar exchange and the split time loop.

Each patch is a block of the global arrays.  A derivative pass along axis
``a`` runs in two phases separated by a barrier:

1. every patch computes, for each of its faces normal to ``a``, the half of
   the junction slope that depends on its own samples and posts it to the
   neighbour across that face;
2. every patch adds the received half to its own half (own first) and solves
   its Hermite-closed local system line by line.

Only patches adjacent along ``a`` exchange anything during that pass.
"""

from __future__ import annotations

import itertools
import math
import os
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor, wait, FIRST_EXCEPTION
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, ExchangeError, LayoutError, NonFiniteError
from .patched_spline import (
    LocalSplineSystem,
    PatchLayout1D,
    PmbcStencil,
    build_pmbc_stencils,
    hermite_derivative_along,
    left_end_slope,
    left_half,
    right_end_slope,
    right_half,
)
from .physics import (
    MaterialModel,
    SourceModel,
    WavefieldSet2D,
    WavefieldSet3D,
    stress_divergence,
    stress_from_strain,
)
from .pml import AxisProfile, PmlState, subsystem_A_step, subsystem_B_step
from .spline_core import Grid1D, derivative_along

PatchIndex = tuple[int, ...]


# ---------------------------------------------------------------------------
# layout


@dataclass(frozen=True)
class PatchLayout3D:
    """Tensor-product patch layout; works for any number of axes."""

    axes: tuple[PatchLayout1D, ...]
    n_workers: int = 1

    def __post_init__(self):
        if self.n_workers < 1:
            raise LayoutError(f"need at least one worker, got {self.n_workers}")

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(ax.p for ax in self.axes)

    @property
    def n_patches(self) -> int:
        return math.prod(self.counts)

    @property
    def patches(self) -> list[PatchIndex]:
        return list(itertools.product(*(range(p) for p in self.counts)))

    def patch_slices(self, idx: PatchIndex) -> tuple[slice, ...]:
        out = []
        for ax, i in zip(self.axes, idx):
            lo, hi = ax.patch_range(i)
            out.append(slice(lo, hi + 1))
        return tuple(out)

    def neighbors(self, idx: PatchIndex, axis: int) -> tuple[PatchIndex | None, PatchIndex | None]:
        i = idx[axis]
        left = right = None
        if i > 0:
            left = idx[:axis] + (i - 1,) + idx[axis + 1 :]
        if i < self.counts[axis] - 1:
            right = idx[:axis] + (i + 1,) + idx[axis + 1 :]
        return left, right

    def owner(self, idx: PatchIndex) -> int:
        flat = int(np.ravel_multi_index(idx, self.counts))
        return flat % self.n_workers

    def patches_of(self, worker: int) -> list[PatchIndex]:
        return [p for p in self.patches if self.owner(p) == worker]

    def face_lines(self, axis: int) -> int:
        """Grid lines crossing one face normal to ``axis``."""
        return math.prod(ax.m + 1 for b, ax in enumerate(self.axes) if b != axis)


@dataclass(frozen=True)
class Junction:
    axis: int
    l: int
    left: PatchIndex
    right: PatchIndex
    lines: int


@dataclass(frozen=True)
class ExchangePlan:
    """Every (left, right) patch pair that swaps junction halves, per axis."""

    junctions: dict[int, tuple[Junction, ...]]

    @classmethod
    def from_layout(cls, layout: PatchLayout3D) -> "ExchangePlan":
        out = {}
        for axis in range(layout.ndim):
            lines = layout.face_lines(axis)
            js = []
            for idx in layout.patches:
                _, right = layout.neighbors(idx, axis)
                if right is not None:
                    js.append(Junction(axis, idx[axis] + 1, idx, right, lines))
            out[axis] = tuple(js)
        return cls(out)

    def pairs(self, axis: int) -> list[tuple[PatchIndex, PatchIndex]]:
        return [(j.left, j.right) for j in self.junctions[axis]]

    def exchanges_per_pass(self, axis: int) -> int:
        """Junction lines swapped in one pass: one scalar each way per line."""
        return sum(j.lines for j in self.junctions[axis])

    def scalars_per_pass(self, axis: int) -> int:
        return 2 * self.exchanges_per_pass(axis)

    @property
    def empty(self) -> bool:
        return not any(self.junctions.values())


def decompose(grids: Sequence[Grid1D], p: Sequence[int], n_nb: int = 20, n_workers: int = 1):
    """Layout and per-axis PMBC stencils for a tensor grid."""
    if len(grids) != len(p):
        raise LayoutError(f"{len(p)} patch counts for {len(grids)} axes")
    axes = tuple(PatchLayout1D(g.n, int(pa), n_nb) for g, pa in zip(grids, p))
    layout = PatchLayout3D(axes, n_workers)
    stencils = tuple(build_pmbc_stencils(g, ax) for g, ax in zip(grids, axes))
    return layout, stencils


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    T: float

    def __post_init__(self):
        if not self.dt > 0.0:
            raise DomainError(f"time step must be positive, got {self.dt}")
        if self.T < 0.0:
            raise DomainError(f"final time must be non-negative, got {self.T}")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-8 * max(1.0, ratio):
            raise DomainError(f"T = {self.T} is not a whole number of steps of {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    def step_of(self, t: float) -> int:
        k = t / self.dt
        if abs(k - round(k)) > 1e-8 * max(1.0, k) or not 0 <= round(k) <= self.n_steps:
            raise DomainError(f"instant {t} is not a step of this time grid")
        return int(round(k))


def worker_count(default: int, deterministic: bool = False) -> int:
    if deterministic:
        return 1
    env = os.environ.get("LOSS_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise LayoutError(f"LOSS_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise LayoutError(f"LOSS_WORKERS must be positive, got {n}")
        return n
    return max(1, default)


# ---------------------------------------------------------------------------
# distributed derivative


class _Mailbox:
    def __init__(self):
        self._box: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()
        self.scalars = 0

    def post(self, src, dst, axis, payload):
        payload = np.asarray(payload, dtype=np.float64)
        with self._lock:
            self._box[(src, dst, axis)] = payload
            self.scalars += payload.size

    def take(self, src, dst, axis):
        with self._lock:
            try:
                return self._box.pop((src, dst, axis))
            except KeyError:
                raise ExchangeError(
                    f"no junction message from patch {src} to patch {dst} on axis {axis}"
                ) from None

    def pending(self) -> int:
        return len(self._box)


class DistributedDerivative:
    """Patched spline derivative over a tensor grid.

    Callable as ``provider(field, axis, out=None)``.  ``exchanges`` counts
    junction lines swapped per axis; ``scalars_sent`` counts the scalars
    that crossed patch boundaries (two per swapped line).
    """

    def __init__(
        self,
        grids: Sequence[Grid1D],
        p: Sequence[int],
        n_nb: int = 20,
        workers: int | None = None,
        deterministic: bool = False,
        timeout: float = 300.0,
    ):
        self.grids = tuple(grids)
        n_patches = math.prod(int(x) for x in p)
        n_workers = worker_count(n_patches if workers is None else workers, deterministic)
        self.layout, self.stencils = decompose(self.grids, p, n_nb, n_workers)
        self.plan = ExchangePlan.from_layout(self.layout)
        self.systems = tuple(
            LocalSplineSystem.build(ax.m, g.h) if ax.p > 1 else None
            for ax, g in zip(self.layout.axes, self.grids)
        )
        self.timeout = timeout
        self.exchanges = [0] * self.layout.ndim
        self.scalars_sent = [0] * self.layout.ndim
        self.passes = [0] * self.layout.ndim
        self._pool = ThreadPoolExecutor(n_workers) if n_workers > 1 and n_patches > 1 else None

    @property
    def n_workers(self) -> int:
        return self.layout.n_workers

    def close(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def reset_counters(self):
        self.exchanges = [0] * self.layout.ndim
        self.scalars_sent = [0] * self.layout.ndim
        self.passes = [0] * self.layout.ndim

    def _phase(self, work: Callable[[PatchIndex], None]):
        # run work on every patch, grouped by owner; returning is the barrier
        lay = self.layout
        if self._pool is None:
            for idx in lay.patches:
                work(idx)
            return

        def run(worker):
            for idx in lay.patches_of(worker):
                work(idx)

        futures = [self._pool.submit(run, w) for w in range(lay.n_workers)]
        done, not_done = wait(futures, timeout=self.timeout, return_when=FIRST_EXCEPTION)
        for f in done:
            f.result()
        if not_done:
            raise ExchangeError(f"{len(not_done)} workers missed the exchange deadline")

    def __call__(self, field, axis, out=None):
        f = np.asarray(field, dtype=np.float64)
        lay = self.layout
        if f.ndim != lay.ndim:
            raise DimensionError(f"{f.ndim}-D field on a {lay.ndim}-D layout")
        expected = tuple(g.n + 1 for g in self.grids)
        if f.shape != expected:
            raise DimensionError(f"field shape {f.shape} does not match grid {expected}")
        if out is None:
            out = np.empty_like(f)
        self.passes[axis] += 1
        if lay.n_patches == 1:
            return derivative_along(f, axis, self.grids[axis], out=out)
        if lay.axes[axis].p == 1:
            grid = self.grids[axis]

            def natural(idx):
                sl = lay.patch_slices(idx)
                derivative_along(f[sl], axis, grid, out=out[sl])

            self._phase(natural)
            return out

        stencil = self.stencils[axis]
        system = self.systems[axis]
        mail = _Mailbox()
        own: dict[PatchIndex, tuple] = {}
        last = lay.counts[axis] - 1

        def send(idx):
            block = f[lay.patch_slices(idx)]
            i = idx[axis]
            left, right = lay.neighbors(idx, axis)
            mine_l = right_half(block, axis, stencil, i) if i > 0 else left_end_slope(block, axis, stencil)
            mine_r = left_half(block, axis, stencil, i + 1) if i < last else right_end_slope(block, axis, stencil)
            if left is not None:
                mail.post(idx, left, axis, mine_l)
            if right is not None:
                mail.post(idx, right, axis, mine_r)
            own[idx] = (mine_l, mine_r)

        def solve(idx):
            sl = lay.patch_slices(idx)
            left, right = lay.neighbors(idx, axis)
            phi_l, phi_r = own[idx]
            if left is not None:
                phi_l = phi_l + mail.take(left, idx, axis)
            if right is not None:
                phi_r = phi_r + mail.take(right, idx, axis)
            hermite_derivative_along(f[sl], axis, phi_l, phi_r, system, out=out[sl])

        self._phase(send)
        self._phase(solve)
        if mail.pending():
            raise ExchangeError(f"{mail.pending()} junction messages were never consumed")
        self.scalars_sent[axis] += mail.scalars
        self.exchanges[axis] += mail.scalars // 2
        return out


# ---------------------------------------------------------------------------
# Strang-split steps


def acoustic_plain_step(fields: WavefieldSet2D, material: MaterialModel, dt: float, provider):
    """A(dt/2) B(dt) A(dt/2) for the acoustic system without absorbing layers."""
    rho = material.rho
    modulus = material.m_p
    for sub in (0.5 * dt, None, 0.5 * dt):
        if sub is None:
            gx = provider(fields.v1, 0)
            gz = provider(fields.v3, 1)
            fields.sigma = fields.sigma - (dt * modulus) * (gx + gz)
        else:
            gx = provider(fields.sigma, 0)
            gz = provider(fields.sigma, 1)
            fields.v1 = fields.v1 - (sub / rho) * gx
            fields.v3 = fields.v3 - (sub / rho) * gz
    return fields


def acoustic_pml_step(
    fields: WavefieldSet2D,
    state: PmlState,
    profiles: Sequence[AxisProfile],
    material: MaterialModel,
    dt: float,
    provider,
):
    """Same splitting with exact-flow updates inside the layers."""
    rho = material.rho
    modulus = material.m_p
    for sub in (0.5 * dt, None, 0.5 * dt):
        if sub is None:
            gx = provider(fields.v1, 0)
            gz = provider(fields.v3, 1)
            subsystem_B_step(fields, state, profiles, dt, modulus, gx, gz)
        else:
            gx = provider(fields.sigma, 0)
            gz = provider(fields.sigma, 1)
            subsystem_A_step(fields, state, profiles, sub, rho, gx, gz)
    return fields


def _elastic_A(fields: WavefieldSet3D, material, source, t, dt, provider):
    stress = stress_from_strain(fields.strains, material.rho, material.c_p, material.c_s)
    div = stress_divergence(stress, provider)
    del stress
    scale = dt / material.rho
    for i, (name, d) in enumerate(zip(("v1", "v2", "v3"), div), start=1):
        if source is not None and i in source.targets:
            d = d + source.amplitude * source.time_factor(t)
        setattr(fields, name, getattr(fields, name) + scale * d)


def _elastic_B(fields: WavefieldSet3D, dt, provider):
    v1, v2, v3 = fields.velocities
    fields.e11 = fields.e11 + dt * provider(v1, 0)
    fields.e22 = fields.e22 + dt * provider(v2, 1)
    fields.e33 = fields.e33 + dt * provider(v3, 2)
    half = 0.5 * dt
    fields.e12 = fields.e12 + half * (provider(v1, 1) + provider(v2, 0))
    fields.e13 = fields.e13 + half * (provider(v1, 2) + provider(v3, 0))
    fields.e23 = fields.e23 + half * (provider(v2, 2) + provider(v3, 1))


def elastic_step(
    fields: WavefieldSet3D,
    material: MaterialModel,
    source: SourceModel | None,
    t: float,
    dt: float,
    provider,
):
    """A(dt/2) B(dt) A(dt/2) for the velocity-strain system starting at time ``t``.

    The source enters each A half with its own step length, sampled at that
    half's start time.
    """
    _elastic_A(fields, material, source, t, 0.5 * dt, provider)
    _elastic_B(fields, dt, provider)
    _elastic_A(fields, material, source, t + 0.5 * dt, 0.5 * dt, provider)
    return fields


def strang_step(fields, dt, provider, material, *, t=0.0, source=None, pml=None):
    """Dispatch one split step on a 2-D or 3-D wavefield set.

    ``pml`` is ``(state, profiles)`` for the 2-D layered path, else ``None``.
    """
    if isinstance(fields, WavefieldSet3D):
        if pml is not None:
            raise DomainError("absorbing layers are only available for the 2-D acoustic system")
        return elastic_step(fields, material, source, t, dt, provider)
    if isinstance(fields, WavefieldSet2D):
        if source is not None:
            raise DomainError("the 2-D acoustic system takes no body force")
        if pml is None:
            return acoustic_plain_step(fields, material, dt, provider)
        state, profiles = pml
        return acoustic_pml_step(fields, state, profiles, material, dt, provider)
    raise DimensionError(f"unsupported wavefield set {type(fields).__name__}")


def check_finite(fields, step: int):
    for name, arr in fields.items():
        if not np.isfinite(arr).all():
            raise NonFiniteError(step, name)


def cfl_number(c_max: float, dt: float, grids: Sequence[Grid1D]) -> float:
    return c_max * dt / min(g.h for g in grids)


def warn_cfl(c_max: float, dt: float, grids: Sequence[Grid1D], limit: float = 0.5) -> float:
    cfl = cfl_number(c_max, dt, grids)
    if cfl > limit:
        warnings.warn(f"c_max*dt/h = {cfl:.3g} exceeds {limit}; the run may be unstable", RuntimeWarning, stacklevel=2)
    return cfl


@dataclass
class TimeLoop:
    """Drives ``strang_step`` and records fields at chosen steps.

    ``record(step, t, fields)`` is called at step 0 and after every step
    listed in ``record_steps``.
    """

    fields: WavefieldSet2D | WavefieldSet3D
    provider: Callable
    material: MaterialModel
    time: TimeGrid
    source: SourceModel | None = None
    pml: tuple | None = None
    check_every: int = 10
    step_seconds: list[float] = field(default_factory=list)

    def run(self, record_steps: Sequence[int] = (), record=None):
        import time as _time

        wanted = set(int(s) for s in record_steps)
        if record is not None and 0 in wanted:
            record(0, 0.0, self.fields)
        dt = self.time.dt
        for n in range(1, self.time.n_steps + 1):
            t0 = _time.perf_counter()
            strang_step(
                self.fields, dt, self.provider, self.material,
                t=(n - 1) * dt, source=self.source, pml=self.pml,
            )
            self.step_seconds.append(_time.perf_counter() - t0)
            if self.check_every and (n % self.check_every == 0 or n == self.time.n_steps):
                check_finite(self.fields, n)
            if record is not None and n in wanted:
                record(n, n * dt, self.fields)
        return self.fields
