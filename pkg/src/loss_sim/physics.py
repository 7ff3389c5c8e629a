"""Material models, sources and right-hand sides of the wave systems.

The 2-D model is the acoustic velocity-stress system in ``(v1, v3, sigma)``.
The 3-D elastic model keeps nine fields (three velocities, six strains) and
forms stresses on demand from the isotropic constitutive law.

A *derivative provider* is any callable ``provider(field, axis) -> ndarray``
returning knot derivatives of ``field`` along ``axis``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, DomainError

Provider = Callable[..., NDArray[np.float64]]

STRAIN_NAMES = ("e11", "e22", "e33", "e12", "e13", "e23")
STRESS_NAMES = ("s11", "s22", "s33", "s12", "s13", "s23")


@dataclass
class MaterialModel:
    """Density and wave speeds; each entry is a scalar or a grid-shaped array."""

    rho: NDArray[np.float64] | float
    c_p: NDArray[np.float64] | float
    c_s: NDArray[np.float64] | float = 0.0

    def __post_init__(self):
        rho, cp, cs = (np.asarray(a, dtype=np.float64) for a in (self.rho, self.c_p, self.c_s))
        if np.any(rho <= 0.0):
            raise DomainError("density must be positive")
        if np.any(cp <= 0.0):
            raise DomainError("P-velocity must be positive")
        if np.any(cs < 0.0):
            raise DomainError("S-velocity must be non-negative")
        if np.any(cp <= cs):
            raise DomainError("P-velocity must exceed S-velocity")

    @property
    def m_p(self):
        return self.rho * self.c_p**2

    @property
    def m_s(self):
        return self.rho * self.c_s**2

    @property
    def c_max(self) -> float:
        return float(np.max(self.c_p))


@dataclass(frozen=True)
class MaterialBox:
    """Axis-aligned box ``[lo, hi]`` per axis with constant properties."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    rho: float
    c_p: float
    c_s: float

    def contains(self, coords: Sequence[NDArray[np.float64]]):
        inside = np.ones(np.broadcast_shapes(*(c.shape for c in coords)), dtype=bool)
        for c, lo, hi in zip(coords, self.lo, self.hi):
            inside &= (c >= lo) & (c <= hi)
        return inside


def layered_material(
    knots: Sequence[NDArray[np.float64]],
    background: tuple[float, float, float],
    boxes: Sequence[MaterialBox] = (),
) -> MaterialModel:
    """Material on the tensor grid ``knots``; later boxes override earlier ones.

    With no boxes the background scalars are returned unchanged.
    """
    if not boxes:
        return MaterialModel(*background)
    ndim = len(knots)
    coords = np.meshgrid(*knots, indexing="ij", sparse=True)
    shape = tuple(len(k) for k in knots)
    arrays = [np.full(shape, v, dtype=np.float64) for v in background]
    for box in boxes:
        if len(box.lo) != ndim or len(box.hi) != ndim:
            raise DimensionError(f"box has {len(box.lo)} axes, grid has {ndim}")
        mask = box.contains(coords)
        for arr, value in zip(arrays, (box.rho, box.c_p, box.c_s)):
            arr[mask] = value
    return MaterialModel(*arrays)


@dataclass
class WavefieldSet2D:
    v1: NDArray[np.float64]
    v3: NDArray[np.float64]
    sigma: NDArray[np.float64]

    def __post_init__(self):
        if not (self.v1.shape == self.v3.shape == self.sigma.shape):
            raise DimensionError("2-D wavefields must share one grid shape")

    @classmethod
    def zeros(cls, shape) -> "WavefieldSet2D":
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self) -> "WavefieldSet2D":
        return WavefieldSet2D(self.v1.copy(), self.v3.copy(), self.sigma.copy())


@dataclass
class WavefieldSet3D:
    v1: NDArray[np.float64]
    v2: NDArray[np.float64]
    v3: NDArray[np.float64]
    e11: NDArray[np.float64]
    e22: NDArray[np.float64]
    e33: NDArray[np.float64]
    e12: NDArray[np.float64]
    e13: NDArray[np.float64]
    e23: NDArray[np.float64]

    def __post_init__(self):
        shapes = {getattr(self, f.name).shape for f in fields(self)}
        if len(shapes) != 1:
            raise DimensionError("3-D wavefields must share one grid shape")

    @classmethod
    def zeros(cls, shape) -> "WavefieldSet3D":
        return cls(*(np.zeros(shape) for _ in range(9)))

    def items(self):
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    @property
    def velocities(self):
        return self.v1, self.v2, self.v3

    @property
    def strains(self):
        return tuple(getattr(self, n) for n in STRAIN_NAMES)

    def copy(self) -> "WavefieldSet3D":
        return WavefieldSet3D(*(a.copy() for _, a in self.items()))


def ricker(t, f_peak: float, delay: float = 0.0):
    """Ricker wavelet ``(1 - 2 a^2) exp(-a^2)`` with ``a = pi f (t - delay)``."""
    if f_peak <= 0.0:
        raise DomainError(f"peak frequency must be positive, got {f_peak}")
    a2 = (np.pi * f_peak * (np.asarray(t, dtype=np.float64) - delay)) ** 2
    out = (1.0 - 2.0 * a2) * np.exp(-a2)
    return float(out) if out.ndim == 0 else out


def gaussian_amplitude(knots: Sequence[NDArray[np.float64]], center: Sequence[float], width: float = 1.0):
    """Peak-one Gaussian ``exp(-|x - c|^2 / width^2)`` on a tensor grid."""
    out = None
    for axis, (k, c) in enumerate(zip(knots, center)):
        g = np.exp(-(((k - c) / width) ** 2))
        shape = [1] * len(knots)
        shape[axis] = len(k)
        g = g.reshape(shape)
        out = g if out is None else out * g
    return out


@dataclass
class SourceModel:
    """Body force ``f_i = A(x) ricker(t)`` on the momentum equations in ``targets``."""

    amplitude: NDArray[np.float64]
    f_peak: float
    delay: float = 0.0
    targets: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self):
        if np.any(self.amplitude < 0.0):
            raise DomainError("source amplitude must be non-negative")

    def time_factor(self, t: float) -> float:
        return ricker(t, self.f_peak, self.delay)


def stress_from_strain(strain, rho, c_p, c_s):
    """Isotropic stresses ``(s11, s22, s33, s12, s13, s23)`` from the six strains."""
    e11, e22, e33, e12, e13, e23 = strain
    cp2 = c_p * c_p
    lam = cp2 - 2.0 * c_s * c_s
    two_mu = 2.0 * c_s * c_s
    s11 = rho * (cp2 * e11 + lam * (e22 + e33))
    s22 = rho * (cp2 * e22 + lam * (e11 + e33))
    s33 = rho * (cp2 * e33 + lam * (e11 + e22))
    s12 = rho * (two_mu * e12)
    s13 = rho * (two_mu * e13)
    s23 = rho * (two_mu * e23)
    return s11, s22, s33, s12, s13, s23


def acoustic2d_gradients(fields2d: WavefieldSet2D, provider: Provider) -> dict[str, NDArray[np.float64]]:
    return {
        "dsigma_dx": provider(fields2d.sigma, 0),
        "dsigma_dz": provider(fields2d.sigma, 1),
        "dv1_dx": provider(fields2d.v1, 0),
        "dv3_dz": provider(fields2d.v3, 1),
    }


def acoustic2d_rhs(fields2d: WavefieldSet2D, material: MaterialModel, provider: Provider):
    """Time derivatives ``(dv1/dt, dv3/dt, dsigma/dt)`` of the acoustic system."""
    g = acoustic2d_gradients(fields2d, provider)
    rho = material.rho
    return (
        -g["dsigma_dx"] / rho,
        -g["dsigma_dz"] / rho,
        -rho * material.c_p**2 * (g["dv1_dx"] + g["dv3_dz"]),
    )


def elastic3d_strain_rates(velocities, provider: Provider):
    """Strain rates ``(e11, e22, e33, e12, e13, e23)`` from the three velocities."""
    v1, v2, v3 = velocities
    return (
        provider(v1, 0),
        provider(v2, 1),
        provider(v3, 2),
        0.5 * (provider(v1, 1) + provider(v2, 0)),
        0.5 * (provider(v1, 2) + provider(v3, 0)),
        0.5 * (provider(v2, 2) + provider(v3, 1)),
    )


def stress_divergence(stress, provider: Provider):
    s11, s22, s33, s12, s13, s23 = stress
    return (
        provider(s11, 0) + provider(s12, 1) + provider(s13, 2),
        provider(s12, 0) + provider(s22, 1) + provider(s23, 2),
        provider(s13, 0) + provider(s23, 1) + provider(s33, 2),
    )


def elastic3d_momentum_rates(strain, material: MaterialModel, source: SourceModel | None, t: float, provider: Provider):
    """Velocity rates ``rho dv_i/dt = d_j sigma_ij + f_i``."""
    stress = stress_from_strain(strain, material.rho, material.c_p, material.c_s)
    div = stress_divergence(stress, provider)
    rates = []
    for i, d in enumerate(div, start=1):
        if source is not None and i in source.targets:
            d = d + source.amplitude * source.time_factor(t)
        rates.append(d / material.rho)
    return tuple(rates)
