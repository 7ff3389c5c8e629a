"""Fourier spectral derivatives and reference runs on periodic grids.

A :class:`SpectralGrid` holds ``n`` equispaced nodes per axis on a period
``[x0, x0 + P)``.  Derivatives multiply each mode by ``i k``; the Nyquist
mode of an even grid is dropped since its derivative is not real.  Fields
are moved onto arbitrary knots by trigonometric interpolation, which is
exact for the periodic representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from numpy.typing import NDArray

from .errors import DimensionError, HorizonError


@dataclass(frozen=True)
class SpectralGrid:
    x0: tuple[float, ...]
    period: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.x0) == len(self.period) == len(self.n)):
            raise DimensionError("x0, period and n need one entry per axis")
        for p, n in zip(self.period, self.n):
            if p <= 0.0 or n < 2:
                raise DimensionError(f"bad periodic axis: period {p}, n {n}")

    @property
    def ndim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    def spacing(self, axis: int) -> float:
        return self.period[axis] / self.n[axis]

    def nodes(self, axis: int) -> NDArray[np.float64]:
        return self.x0[axis] + np.arange(self.n[axis]) * self.spacing(axis)

    def wavenumbers(self, axis: int) -> NDArray[np.float64]:
        """Non-negative half-spectrum wavenumbers with the even-grid Nyquist zeroed."""
        n = self.n[axis]
        k = 2.0 * math.pi * np.fft.rfftfreq(n, d=self.spacing(axis))
        if n % 2 == 0:
            k[-1] = 0.0
        return k


def spectral_derivative(field, axis: int, sgrid: SpectralGrid, out=None):
    f = np.asarray(field, dtype=np.float64)
    if f.shape != sgrid.shape:
        raise DimensionError(f"field shape {f.shape} does not match grid {sgrid.shape}")
    shape = [1] * f.ndim
    shape[axis] = -1
    ik = 1j * sgrid.wavenumbers(axis).reshape(shape)
    spec = sfft.rfft(f, axis=axis)
    spec *= ik
    res = sfft.irfft(spec, n=sgrid.n[axis], axis=axis)
    if out is None:
        return res
    out[...] = res
    return out


class SpectralDerivative:
    """Derivative provider for fields on ``sgrid``."""

    def __init__(self, sgrid: SpectralGrid):
        self.sgrid = sgrid

    def __call__(self, field, axis, out=None):
        return spectral_derivative(field, axis, self.sgrid, out=out)


def interpolation_matrix(n: int, period: float, x0: float, points) -> NDArray[np.float64]:
    """Rows evaluate the trigonometric interpolant of ``n`` periodic samples at ``points``.

    Even ``n`` splits the Nyquist mode evenly between ``+-n/2`` so the
    interpolant is real; the kernel is then ``sin(n t/2) / (n tan(t/2))``.
    """
    pts = np.asarray(points, dtype=np.float64)
    nodes = np.arange(n) * (2.0 * math.pi / n)
    theta = 2.0 * math.pi * (pts[:, None] - x0) / period - nodes[None, :]
    theta = np.mod(theta + math.pi, 2.0 * math.pi) - math.pi
    half = 0.5 * theta
    hit = np.abs(theta) < 1e-14
    num = np.sin(0.5 * n * theta)
    den = n * (np.tan(half) if n % 2 == 0 else np.sin(half))
    with np.errstate(divide="ignore", invalid="ignore"):
        mat = np.where(hit, 1.0, num / np.where(hit, 1.0, den))
    return mat


def apply_separable(field, matrices: Sequence[NDArray[np.float64]]):
    """Apply one matrix per axis (``out_axis = M @ in_axis``)."""
    out = np.asarray(field, dtype=np.float64)
    for axis, mat in enumerate(matrices):
        out = np.moveaxis(np.tensordot(mat, out, axes=([1], [axis])), 0, axis)
    return np.ascontiguousarray(out)


def spectral_resample(field, sgrid: SpectralGrid, points: Sequence[NDArray[np.float64]]):
    """Evaluate a periodic field on the tensor grid ``points`` (one array per axis)."""
    if len(points) != sgrid.ndim:
        raise DimensionError(f"{len(points)} point sets for a {sgrid.ndim}-D grid")
    mats = [
        interpolation_matrix(sgrid.n[a], sgrid.period[a], sgrid.x0[a], points[a])
        for a in range(sgrid.ndim)
    ]
    return apply_separable(field, mats)


def check_horizon(c_max: float, T: float, margin: float) -> None:
    """Refuse reference runs whose waves could wrap back into the region of interest."""
    if not c_max * T < margin:
        raise HorizonError(
            f"c_max*T = {c_max * T:.6g} reaches the periodic margin {margin:.6g}; enlarge the reference domain"
        )


# ---------------------------------------------------------------------------
# reference runs

DEFAULT_WINDOW_FACTOR = 2.75
DEFAULT_SAMPLES_2D = 256
DEFAULT_NODES_3D = 128


def reference_grid(cfg) -> SpectralGrid:
    """Periodic grid for the reference run of ``cfg``.

    2-D: the physical window is centred in a larger period (``reference.period``,
    default 2.75 window widths) so that nothing wraps around before ``T``.
    3-D: the period is the physical box itself.
    """
    from .scenario import AXES

    axes = AXES[cfg.kind]
    x0, period, n = [], [], []
    for a in axes:
        lo, hi = cfg[f"domain.{a}_min"], cfg[f"domain.{a}_max"]
        width = hi - lo
        if cfg.kind == "acoustic2d":
            p = cfg["reference.period"] or DEFAULT_WINDOW_FACTOR * width
            if p < width:
                raise HorizonError(f"reference period {p} is shorter than the window {width}")
            nodes = cfg["reference.n"] or int(round(p * DEFAULT_SAMPLES_2D / width))
            x0.append(0.5 * (lo + hi) - 0.5 * p)
        else:
            p = width
            nodes = cfg["reference.n"] or DEFAULT_NODES_3D
            x0.append(lo)
        period.append(p)
        n.append(nodes)
    return SpectralGrid(tuple(x0), tuple(period), tuple(n))


@dataclass
class ReferenceRun:
    sgrid: SpectralGrid
    fields: dict[tuple[str, float], NDArray[np.float64]]
    window: tuple[tuple[float, float], ...]

    def at(self, name: str, t: float) -> NDArray[np.float64]:
        for (fname, ft), arr in self.fields.items():
            if fname == name and math.isclose(ft, t, rel_tol=1e-9, abs_tol=1e-12):
                return arr
        raise DimensionError(f"reference holds no {name!r} at t = {t}")

    def global_max(self, name: str, t: float) -> float:
        return float(np.abs(self.at(name, t)).max())

    def sample(self, name: str, t: float, points: Sequence[NDArray[np.float64]]):
        return spectral_resample(self.at(name, t), self.sgrid, points)

    @property
    def times(self) -> list[float]:
        return sorted({t for _, t in self.fields})


def reference_run(cfg, names: Sequence[str] | None = None, times: Sequence[float] | None = None) -> ReferenceRun:
    """Solve the scenario of ``cfg`` with spectral derivatives and the same split stepping."""
    from .runtime import TimeGrid, TimeLoop
    from .scenario import AXES, initial_fields, material_on, source_on

    sgrid = reference_grid(cfg)
    names = tuple(names) if names is not None else tuple(cfg["output.fields"])
    times = tuple(times) if times is not None else (tuple(cfg["output.times"]) or (cfg["time.T"],))
    T = max(times)
    nodes = [sgrid.nodes(a) for a in range(sgrid.ndim)]
    material = material_on(cfg, nodes)
    if cfg.kind == "acoustic2d":
        margin = min(p - (cfg[f"domain.{a}_max"] - cfg[f"domain.{a}_min"]) for p, a in zip(sgrid.period, "xz"))
        check_horizon(material.c_max, T, margin)
    time = TimeGrid(cfg["time.dt"], T)
    store: dict[tuple[str, float], NDArray[np.float64]] = {}

    def record(step, t, fields):
        for name in names:
            store[(name, t)] = getattr(fields, name).copy()

    loop = TimeLoop(
        initial_fields(cfg, nodes), SpectralDerivative(sgrid), material, time,
        source_on(cfg, nodes), None, check_every=cfg["output.check_every"],
    )
    loop.run([time.step_of(t) for t in times], record)
    window = tuple((cfg[f"domain.{a}_min"], cfg[f"domain.{a}_max"]) for a in AXES[cfg.kind])
    return ReferenceRun(sgrid, store, window)


def reference_run_2d(cfg, names=None, times=None) -> ReferenceRun:
    if cfg.kind != "acoustic2d":
        raise DimensionError(f"reference_run_2d needs an acoustic2d scenario, got {cfg.kind}")
    return reference_run(cfg, names, times)


def reference_run_3d(cfg, names=None, times=None) -> ReferenceRun:
    if cfg.kind != "elastic3d":
        raise DimensionError(f"reference_run_3d needs an elastic3d scenario, got {cfg.kind}")
    return reference_run(cfg, names, times)
