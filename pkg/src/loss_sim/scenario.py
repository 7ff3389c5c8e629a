"""From a scenario config to grids, media, initial data and a finished run.

Grid sizes in the config count intervals: ``grid.nx = 64`` puts 65 knots on
the physical x-range.  A 2-D absorbing layer of ``pml.cells`` cells is added
outside the physical domain on every side, so the computational axis holds
``nx + 2 * cells`` intervals and the physical knots sit at offset ``cells``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .config import Config
from .errors import ConfigError, DomainError
from .physics import (
    MaterialBox,
    MaterialModel,
    SourceModel,
    WavefieldSet2D,
    WavefieldSet3D,
    gaussian_amplitude,
    layered_material,
)
from .pml import AxisProfile, PmlState, build_profile
from .runtime import DistributedDerivative, TimeGrid, TimeLoop, warn_cfl
from .snapio import Snapshot
from .spline_core import Grid1D

AXES = {"acoustic2d": ("x", "z"), "elastic3d": ("x", "y", "z")}
UNITS = {
    "acoustic2d": {"v1": "m/s", "v3": "m/s", "sigma": "Pa"},
    "elastic3d": {"v1": "km/s", "v2": "km/s", "v3": "km/s"},
}


@dataclass
class ScenarioSetup:
    config: Config
    kind: str
    phys_grids: tuple[Grid1D, ...]
    grids: tuple[Grid1D, ...]
    offset: int
    material: MaterialModel
    fields: WavefieldSet2D | WavefieldSet3D
    profiles: tuple[AxisProfile, ...] | None
    source: SourceModel | None
    time: TimeGrid
    record_times: tuple[float, ...]
    patches: tuple[int, ...]
    n_nb: int

    @property
    def axes(self) -> tuple[str, ...]:
        return AXES[self.kind]

    @property
    def ndim(self) -> int:
        return len(self.grids)

    @property
    def phys_slices(self) -> tuple[slice, ...]:
        return tuple(slice(self.offset, self.offset + g.n + 1) for g in self.phys_grids)

    @property
    def extents(self) -> tuple[tuple[float, float], ...]:
        return tuple((g.x_min, g.x_max) for g in self.phys_grids)

    @property
    def c_max(self) -> float:
        return self.material.c_max


def _axis_grid(cfg: Config, name: str) -> Grid1D:
    return Grid1D(cfg[f"domain.{name}_min"], cfg[f"domain.{name}_max"], cfg[f"grid.n{name}"])


def boxes_from_config(cfg: Config, ndim: int) -> list[MaterialBox]:
    out = []
    for vals in cfg.boxes():
        if len(vals) != 2 * ndim + 3:
            raise ConfigError(f"material boxes need {2 * ndim + 3} numbers (lo/hi per axis, rho, c_p, c_s), got {len(vals)}")
        lo = tuple(vals[0 : 2 * ndim : 2])
        hi = tuple(vals[1 : 2 * ndim : 2])
        out.append(MaterialBox(lo, hi, *vals[2 * ndim :]))
    return out


def material_on(cfg: Config, knots: Sequence[NDArray[np.float64]]) -> MaterialModel:
    background = (cfg["material.rho"], cfg["material.c_p"], cfg["material.c_s"])
    return layered_material(knots, background, boxes_from_config(cfg, len(knots)))


def initial_fields(cfg: Config, knots: Sequence[NDArray[np.float64]]):
    shape = tuple(len(k) for k in knots)
    if cfg.kind == "elastic3d":
        if cfg["initial.kind"] != "zero":
            raise ConfigError("the elastic scenario starts from rest; use initial.kind = zero")
        return WavefieldSet3D.zeros(shape)
    fields = WavefieldSet2D.zeros(shape)
    kind = cfg["initial.kind"]
    if kind == "gaussian":
        x, z = knots
        dx = (x - cfg["initial.x0"])[:, None]
        dz = (z - cfg["initial.z0"])[None, :]
        fields.sigma = cfg["initial.amplitude"] * np.exp(-cfg["initial.exponent"] * (dx * dx + dz * dz))
    elif kind != "zero":
        raise ConfigError(f"initial.kind must be gaussian or zero, got {kind!r}")
    return fields


def source_on(cfg: Config, knots: Sequence[NDArray[np.float64]]) -> SourceModel | None:
    kind = cfg["source.kind"]
    if kind == "none":
        return None
    if kind != "ricker":
        raise ConfigError(f"source.kind must be ricker or none, got {kind!r}")
    if cfg.kind != "elastic3d":
        raise ConfigError("body-force sources are only defined for the elastic scenario")
    center = (cfg["source.x0"], cfg["source.y0"], cfg["source.z0"])
    amp = gaussian_amplitude(knots, center, cfg["source.width"])
    targets = tuple(cfg["source.targets"])
    if not set(targets) <= {1, 2, 3}:
        raise ConfigError(f"source.targets must be drawn from 1, 2, 3, got {targets}")
    return SourceModel(amp, cfg["source.f_peak"], cfg["source.delay"], targets)


def build_setup(cfg: Config) -> ScenarioSetup:
    kind = cfg.kind
    axes = AXES[kind]
    phys = tuple(_axis_grid(cfg, a) for a in axes)
    cells = cfg["pml.cells"]
    if cells < 0:
        raise ConfigError(f"pml.cells must be non-negative, got {cells}")
    if cells and kind != "acoustic2d":
        raise ConfigError("absorbing layers are only available for the 2-D acoustic scenario")
    grids = tuple(
        Grid1D(g.x_min - cells * g.h, g.x_max + cells * g.h, g.n + 2 * cells) if cells else g for g in phys
    )
    knots = [g.knots for g in grids]
    material = material_on(cfg, knots)
    profiles = None
    if cells:
        c = material.c_max
        f0 = cfg["pml.f0"] if cfg["pml.f0"] > 0.0 else c / cells
        profiles = tuple(
            build_profile(g, cells, cfg["pml.R"], cfg["pml.k_max"], f0, c, cfg["pml.m"], cfg["pml.p_exp"])
            for g in grids
        )
    time = TimeGrid(cfg["time.dt"], cfg["time.T"])
    times = tuple(cfg["output.times"]) or (time.T,)
    for t in times:
        time.step_of(t)
    patches = tuple(cfg[f"decomposition.p{a}"] for a in axes)
    return ScenarioSetup(
        cfg, kind, phys, grids, cells, material, initial_fields(cfg, knots), profiles,
        source_on(cfg, knots), time, times, patches, cfg["decomposition.n_nb"],
    )


def make_provider(setup: ScenarioSetup, workers: int | None = None, deterministic: bool = False):
    return DistributedDerivative(setup.grids, setup.patches, setup.n_nb, workers=workers, deterministic=deterministic)


@dataclass
class RunResult:
    setup: ScenarioSetup
    snapshots: list[Snapshot]
    fields: WavefieldSet2D | WavefieldSet3D
    step_seconds: list[float]
    exchanges: list[int] = field(default_factory=list)
    scalars_sent: list[int] = field(default_factory=list)

    def snapshot(self, name: str, t: float) -> Snapshot:
        for s in self.snapshots:
            if s.name == name and math.isclose(s.time, t, rel_tol=1e-9, abs_tol=1e-12):
                return s
        raise DomainError(f"no snapshot of {name!r} at t = {t}")


def snapshot_recorder(setup: ScenarioSetup, names: Sequence[str], sink: list, slices=None, extents=None):
    slices = setup.phys_slices if slices is None else slices
    extents = setup.extents if extents is None else extents
    units = UNITS[setup.kind]

    def record(step, t, fields):
        for name in names:
            data = getattr(fields, name)[slices].copy()
            sink.append(Snapshot(data, extents, t, name, units.get(name, "1")))

    return record


def run_scenario(
    cfg_or_setup: Config | ScenarioSetup,
    provider: Callable | None = None,
    workers: int | None = None,
    deterministic: bool = False,
    fields: Sequence[str] | None = None,
) -> RunResult:
    """Run the scenario and collect physical-domain snapshots at the output times."""
    setup = cfg_or_setup if isinstance(cfg_or_setup, ScenarioSetup) else build_setup(cfg_or_setup)
    names = tuple(fields) if fields is not None else tuple(setup.config["output.fields"])
    own = provider is None
    if own:
        provider = make_provider(setup, workers, deterministic)
    warn_cfl(setup.c_max, setup.time.dt, setup.grids)
    pml = None
    if setup.profiles is not None:
        pml = (PmlState.zeros(setup.profiles, setup.fields.v1.shape), setup.profiles)
    snaps: list[Snapshot] = []
    loop = TimeLoop(
        setup.fields.copy(), provider, setup.material, setup.time, setup.source, pml,
        check_every=setup.config["output.check_every"],
    )
    steps = [setup.time.step_of(t) for t in setup.record_times]
    try:
        final = loop.run(steps, snapshot_recorder(setup, names, snaps))
    finally:
        if own:
            provider.close()
    return RunResult(
        setup, snaps, final, loop.step_seconds,
        list(getattr(provider, "exchanges", [])), list(getattr(provider, "scalars_sent", [])),
    )
