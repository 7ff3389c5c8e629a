"""Error metrics, convergence sweeps, absorbing-layer studies and traces.

Runs are compared on a fixed evaluation lattice: ``reference.eval_n``
intervals per axis spanning the physical domain (default: the run's own
knots).  The numerical field is carried there by tensor spline evaluation on
its full computational grid; the reference by trigonometric interpolation.
Errors are normalised by the largest reference magnitude over the whole
reference domain at that instant, so one normalisation serves every grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .config import Config
from .errors import DimensionError, DomainError
from .pml import PmlState
from .runtime import TimeLoop, warn_cfl
from .scenario import AXES, ScenarioSetup, build_setup, make_provider
from .snapio import Snapshot, write_table
from .spectral import ReferenceRun, apply_separable, reference_run
from .spline_core import Grid1D, resample_matrix

ROUNDING_FLOOR = 1e-13
LENGTH_UNIT = {"acoustic2d": "m", "elastic3d": "km"}


@dataclass(frozen=True)
class Metrics:
    eps2: float
    eps_inf: float
    norm: float


def _payload(x):
    return x.data if isinstance(x, Snapshot) else np.asarray(x, dtype=np.float64)


def compute_metrics(num, ref, norm: float | None = None) -> Metrics:
    """Relative l2 and max errors of ``num`` against ``ref``.

    Accepts snapshots or arrays.  ``norm`` defaults to ``max|ref|`` over the
    compared knots.
    """
    if isinstance(num, Snapshot) and isinstance(ref, Snapshot):
        if num.extents != ref.extents:
            raise DimensionError(f"extents differ: {num.extents} vs {ref.extents}")
    a, b = _payload(num), _payload(ref)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    if norm is None:
        norm = float(np.abs(b).max()) if b.size else 0.0
    if not norm > 0.0:
        raise DomainError("reference field is identically zero; relative errors are undefined")
    diff = a - b
    return Metrics(float(np.sqrt(np.sum(diff * diff))) / norm, float(np.abs(diff).max()) / norm, float(norm))


# ---------------------------------------------------------------------------
# runs sampled on a lattice


def lattice(cfg: Config, eval_n: int | None = None) -> list[NDArray[np.float64]]:
    out = []
    for a in AXES[cfg.kind]:
        n = eval_n or cfg["reference.eval_n"] or cfg[f"grid.n{a}"]
        out.append(np.linspace(cfg[f"domain.{a}_min"], cfg[f"domain.{a}_max"], n + 1))
    return out


def run_on_lattice(
    setup: ScenarioSetup,
    names: Sequence[str],
    points: Sequence[NDArray[np.float64]],
    workers: int | None = None,
    deterministic: bool = False,
) -> dict[tuple[str, float], NDArray[np.float64]]:
    """Run ``setup`` and keep each recorded field evaluated on ``points``."""
    mats = [resample_matrix(g, p) for g, p in zip(setup.grids, points)]
    store: dict[tuple[str, float], NDArray[np.float64]] = {}
    # key by the requested instant, not step * dt, so lookups by config time hit
    wanted = {setup.time.step_of(t): t for t in setup.record_times}

    def record(step, t, fields):
        for name in names:
            store[(name, wanted.get(step, t))] = apply_separable(getattr(fields, name), mats)

    warn_cfl(setup.c_max, setup.time.dt, setup.grids)
    pml = None
    if setup.profiles is not None:
        pml = (PmlState.zeros(setup.profiles, setup.fields.v1.shape), setup.profiles)
    with make_provider(setup, workers, deterministic) as provider:
        loop = TimeLoop(
            setup.fields.copy(), provider, setup.material, setup.time, setup.source, pml,
            check_every=setup.config["output.check_every"],
        )
        loop.run(list(wanted), record)
    return store


def compare_to_reference(
    cfg: Config,
    reference: ReferenceRun,
    points: Sequence[NDArray[np.float64]],
    name: str = "v3",
    **run_kw,
) -> dict[float, Metrics]:
    setup = build_setup(cfg)
    num = run_on_lattice(setup, [name], points, **run_kw)
    out = {}
    for t in setup.record_times:
        ref = reference.sample(name, t, points)
        out[t] = compute_metrics(num[(name, t)], ref, norm=reference.global_max(name, t))
    return out


def _with_grid(cfg: Config, n: int) -> Config:
    out = cfg.copy()
    for a in AXES[cfg.kind]:
        out.set(f"grid.n{a}", n)
    return out


# ---------------------------------------------------------------------------
# convergence sweep


@dataclass
class SweepResult:
    grids: list[int]
    times: list[float]
    metrics: dict[tuple[int, float], Metrics]
    spacing: dict[int, float]
    orders: dict[float, float | None]
    notices: list[str] = field(default_factory=list)
    length_unit: str = "m"

    def eps2(self, n: int, t: float) -> float:
        return self.metrics[(n, t)].eps2

    def doubling_ratio(self, n: int, t: float) -> float | None:
        """``log2(e(N)/e(2N))`` when both grids are in the sweep."""
        if 2 * n not in self.grids:
            return None
        a, b = self.eps2(n, t), self.eps2(2 * n, t)
        if a <= ROUNDING_FLOOR or b <= ROUNDING_FLOOR:
            return None
        return math.log2(a / b)

    def table(self) -> str:
        header = ["t_s"]
        header += [f"eps2_N{n}" for n in self.grids]
        header += [f"einf_N{n}" for n in self.grids]
        pairs = [n for n in self.grids if 2 * n in self.grids]
        header += [f"log2_ratio_N{n}_N{2 * n}" for n in pairs]
        header.append("fitted_order")
        rows = []
        for t in self.times:
            row: list = [float(t)]
            row += [self.eps2(n, t) for n in self.grids]
            row += [self.metrics[(n, t)].eps_inf for n in self.grids]
            for n in pairs:
                r = self.doubling_ratio(n, t)
                row.append("" if r is None else r)
            o = self.orders.get(t)
            row.append("" if o is None else o)
            rows.append(row)
        return write_table(rows, header)


def fit_order(h: Sequence[float], err: Sequence[float]) -> float | None:
    """Least-squares slope of log(err) against log(h); None at the rounding floor."""
    h = np.asarray(h, dtype=np.float64)
    e = np.asarray(err, dtype=np.float64)
    if len(h) < 2 or np.any(e <= ROUNDING_FLOOR):
        return None
    slope, _ = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope)


def convergence_sweep(
    cfg: Config,
    grids: Sequence[int],
    times: Sequence[float] | None = None,
    reference: ReferenceRun | None = None,
    name: str = "v3",
    **run_kw,
) -> SweepResult:
    grids = sorted(int(n) for n in grids)
    if not grids:
        raise DimensionError("empty grid list")
    times = sorted(times if times is not None else (cfg["output.times"] or (cfg["time.T"],)))
    base = cfg.with_values(time__T=max(times), output__times=tuple(times))
    if reference is None:
        reference = reference_run(base, [name], times)
    points = lattice(base, cfg["reference.eval_n"] or grids[0])
    metrics: dict[tuple[int, float], Metrics] = {}
    spacing = {}
    for n in grids:
        run_cfg = _with_grid(base, n)
        spacing[n] = build_setup(run_cfg).phys_grids[0].h
        for t, m in compare_to_reference(run_cfg, reference, points, name, **run_kw).items():
            metrics[(n, t)] = m
    orders, notices = {}, []
    for t in times:
        o = fit_order([spacing[n] for n in grids], [metrics[(n, t)].eps2 for n in grids])
        if o is None:
            notices.append(f"t = {t:g}: errors at the rounding floor, order fit skipped")
        orders[t] = o
    return SweepResult(grids, list(times), metrics, spacing, orders, notices, LENGTH_UNIT[cfg.kind])


# ---------------------------------------------------------------------------
# absorbing-layer study

STUDY_KEYS = {"L": "pml.cells", "R": "pml.R", "k_max": "pml.k_max"}


@dataclass
class StudyResult:
    vary: str
    values: list[float]
    times: list[float]
    metrics: dict[tuple[float, float], Metrics]

    def eps2(self, value, t: float) -> float:
        return self.metrics[(value, t)].eps2

    def table(self) -> str:
        header = [self.vary] + [f"eps2_t{t:g}s" for t in self.times] + [f"einf_t{t:g}s" for t in self.times]
        rows = []
        for v in self.values:
            row: list = [v]
            row += [self.metrics[(v, t)].eps2 for t in self.times]
            row += [self.metrics[(v, t)].eps_inf for t in self.times]
            rows.append(row)
        return write_table(rows, header)


def pml_study(
    cfg: Config,
    vary: str,
    values: Sequence,
    times: Sequence[float] | None = None,
    reference: ReferenceRun | None = None,
    name: str = "v3",
    **run_kw,
) -> StudyResult:
    if vary not in STUDY_KEYS:
        raise DomainError(f"vary must be one of {', '.join(STUDY_KEYS)}, got {vary!r}")
    if cfg.kind != "acoustic2d":
        raise DimensionError("absorbing-layer studies need the acoustic2d scenario")
    key = STUDY_KEYS[vary]
    values = [int(v) if vary == "L" else float(v) for v in values]
    times = sorted(times if times is not None else (cfg["output.times"] or (cfg["time.T"],)))
    base = cfg.with_values(time__T=max(times), output__times=tuple(times))
    if reference is None:
        reference = reference_run(base, [name], times)
    points = lattice(base)
    metrics = {}
    for v in values:
        for t, m in compare_to_reference(base.with_values(**{key.replace(".", "__"): v}), reference, points, name, **run_kw).items():
            metrics[(v, t)] = m
    return StudyResult(vary, values, list(times), metrics)


# ---------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class LineSpec:
    """Axis-aligned line: ``axis`` index plus the fixed coordinates of the other axes."""

    axis: int
    point: tuple[float, ...]

    @classmethod
    def parse(cls, text: str, names: Sequence[str]) -> "LineSpec":
        # "z@0,0" -> line along z through x = 0, y = 0
        axis_name, _, rest = text.partition("@")
        axis_name = axis_name.strip()
        if axis_name not in names:
            raise DomainError(f"unknown axis {axis_name!r}; expected one of {', '.join(names)}")
        try:
            point = tuple(float(s) for s in rest.split(",") if s.strip())
        except ValueError:
            raise DomainError(f"cannot read line point {rest!r}") from None
        if len(point) != len(names) - 1:
            raise DomainError(f"line along {axis_name} needs {len(names) - 1} fixed coordinates, got {len(point)}")
        return cls(list(names).index(axis_name), point)


def _along_line(snap: Snapshot, line: LineSpec) -> NDArray[np.float64]:
    if line.axis >= snap.data.ndim:
        raise DimensionError(f"line axis {line.axis} on a {snap.data.ndim}-D snapshot")
    out = snap.data
    others = [a for a in range(snap.data.ndim) if a != line.axis]
    # collapse the fixed axes from the last to the first so indices stay valid
    for a, c in sorted(zip(others, line.point), reverse=True):
        lo, hi = snap.extents[a]
        n = snap.data.shape[a] - 1
        tol = 1e-9 * (hi - lo)
        if c < lo - tol or c > hi + tol:
            raise DomainError(f"line coordinate {c} lies outside [{lo}, {hi}]")
        u = (c - lo) / (hi - lo) * n
        k = int(round(u))
        if abs(u - k) < 1e-9:
            out = np.take(out, k, axis=a)
        else:
            row = resample_matrix(Grid1D(lo, hi, n), [c])[0]
            out = np.tensordot(out, row, axes=([a], [0]))
    return np.asarray(out)


def trace_extract(series: Sequence[Snapshot], line: LineSpec) -> tuple[list[str], list[list]]:
    """Field values along ``line`` at each instant, one row per position."""
    if not series:
        raise DimensionError("empty snapshot series")
    series = sorted(series, key=lambda s: s.time)
    first = series[0]
    for s in series[1:]:
        if s.dims != first.dims or s.extents != first.extents:
            raise DimensionError("snapshots in a series must share dims and extents")
    coords = first.axis_points(line.axis)
    columns = [_along_line(s, line) for s in series]
    unit = f"[{first.unit}]" if first.unit else ""
    header = [f"position_{line.axis}"] + [f"{first.name}{unit}_t{s.time:g}s" for s in series]
    rows = [[float(x)] + [float(c[i]) for c in columns] for i, x in enumerate(coords)]
    return header, rows


def trace_csv(series: Sequence[Snapshot], line: LineSpec) -> str:
    header, rows = trace_extract(series, line)
    return write_table(rows, header)


# ---------------------------------------------------------------------------
# energy


def discrete_energy(fields, material, spacing: Sequence[float], dt: float | None = None, provider=None) -> float:
    """Acoustic energy ``sum(sigma^2/M + rho |v|^2) dV``.

    With ``dt`` and a derivative ``provider`` the modified energy
    ``E - dt^2/4 sum |grad sigma|^2 / rho dV`` is returned instead; the split
    step conserves it exactly for a skew-symmetric derivative.
    """
    dv = math.prod(spacing)
    rho = material.rho
    e = np.sum(fields.sigma**2 / material.m_p) + np.sum(rho * (fields.v1**2 + fields.v3**2))
    if dt is not None:
        if provider is None:
            raise DomainError("the modified energy needs a derivative provider")
        gx = provider(fields.sigma, 0)
        gz = provider(fields.sigma, 1)
        e = e - 0.25 * dt * dt * np.sum((gx * gx + gz * gz) / rho)
    return float(e * dv)
