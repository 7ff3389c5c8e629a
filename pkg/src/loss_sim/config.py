"""Flat ``section.key = value`` scenario files.

Blank lines and ``#`` comments are ignored.  Every key is typed; unknown keys
and malformed values raise :class:`ConfigError` with the offending line.
:func:`dump_config` writes the explicitly set keys back in sorted order with
canonical value spelling, so ``parse(dump(parse(text)))`` is a fixed point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

_BOX_KEY = re.compile(r"material\.box\d+$")

# key -> (kind, default); kinds: int, float, str, bool, floats, ints, strs
SCHEMA: dict[str, tuple[str, Any]] = {
    "scenario.kind": ("str", None),
    "scenario.name": ("str", ""),
    "grid.nx": ("int", 64),
    "grid.ny": ("int", 64),
    "grid.nz": ("int", 64),
    "domain.x_min": ("float", -5.0),
    "domain.x_max": ("float", 5.0),
    "domain.y_min": ("float", -5.0),
    "domain.y_max": ("float", 5.0),
    "domain.z_min": ("float", -5.0),
    "domain.z_max": ("float", 5.0),
    "decomposition.px": ("int", 1),
    "decomposition.py": ("int", 1),
    "decomposition.pz": ("int", 1),
    "decomposition.n_nb": ("int", 20),
    "material.rho": ("float", 1.0),
    "material.c_p": ("float", 1.0),
    "material.c_s": ("float", 0.0),
    "initial.kind": ("str", "zero"),
    "initial.amplitude": ("float", 1.0),
    "initial.exponent": ("float", 5.0),
    "initial.x0": ("float", 0.0),
    "initial.z0": ("float", 0.0),
    "source.kind": ("str", "none"),
    "source.f_peak": ("float", 100.0),
    "source.delay": ("float", 0.0),
    "source.x0": ("float", 0.0),
    "source.y0": ("float", 0.0),
    "source.z0": ("float", 0.0),
    "source.width": ("float", 1.0),
    "source.targets": ("ints", (1, 2, 3)),
    "pml.cells": ("int", 0),
    "pml.R": ("float", 1e-6),
    "pml.k_max": ("float", 1.0),
    "pml.f0": ("float", 0.0),
    "pml.m": ("float", 1.0),
    "pml.p_exp": ("float", 1.0),
    "time.dt": ("float", None),
    "time.T": ("float", None),
    "output.times": ("floats", ()),
    "output.fields": ("strs", ("v3",)),
    "output.trace_axis": ("str", ""),
    "output.trace_point": ("floats", ()),
    "output.check_every": ("int", 10),
    "reference.period": ("float", 0.0),
    "reference.n": ("int", 0),
    "reference.eval_n": ("int", 0),
}

KINDS = ("acoustic2d", "elastic3d")


def _parse_value(kind: str, raw: str, line: int | None):
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if kind == "str":
            return raw
        items = [s.strip() for s in raw.split(",") if s.strip()]
        if kind == "floats":
            return tuple(float(s) for s in items)
        if kind == "ints":
            return tuple(int(s) for s in items)
        if kind == "strs":
            return tuple(items)
    except ValueError:
        raise ConfigError(f"cannot read {raw!r} as {kind}", line) from None
    raise ConfigError(f"unknown value kind {kind}", line)


def _format_value(kind: str, value) -> str:
    if kind == "float":
        return repr(float(value))
    if kind == "int":
        return str(int(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "str":
        return value
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    return ", ".join(str(v) for v in value)


def key_kind(key: str) -> str:
    if _BOX_KEY.match(key):
        return "floats"
    try:
        return SCHEMA[key][0]
    except KeyError:
        raise ConfigError(f"unknown key {key!r}") from None


@dataclass
class Config:
    """Explicitly set values; :meth:`get` falls back to the schema default."""

    values: dict[str, Any] = field(default_factory=dict)

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        if _BOX_KEY.match(key):
            return None
        try:
            default = SCHEMA[key][1]
        except KeyError:
            raise ConfigError(f"unknown key {key!r}") from None
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default

    def __getitem__(self, key: str):
        return self.get(key)

    def set(self, key: str, value) -> "Config":
        kind = key_kind(key)
        if isinstance(value, str) and kind != "str":
            value = _parse_value(kind, value, None)
        self.values[key] = value
        return self

    def with_values(self, **updates) -> "Config":
        """Copy with ``section__key=value`` overrides (double underscore for the dot)."""
        out = Config(dict(self.values))
        for k, v in updates.items():
            out.set(k.replace("__", "."), v)
        return out

    def copy(self) -> "Config":
        return Config(dict(self.values))

    @property
    def kind(self) -> str:
        return self.get("scenario.kind")

    def boxes(self) -> list[tuple[float, ...]]:
        keys = sorted((k for k in self.values if _BOX_KEY.match(k)), key=lambda k: int(k[len("material.box") :]))
        return [self.values[k] for k in keys]


def parse_config(text: str) -> Config:
    cfg = Config()
    seen: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        try:
            kind = key_kind(key)
        except ConfigError as exc:
            raise ConfigError(str(exc), lineno) from None
        if raw == "" and kind not in ("str", "floats", "ints", "strs"):
            raise ConfigError(f"missing value for {key!r}", lineno)
        cfg.values[key] = _parse_value(kind, raw, lineno)
        seen[key] = lineno
    kind = cfg.values.get("scenario.kind")
    if kind is None:
        raise ConfigError("missing required key 'scenario.kind'")
    if kind not in KINDS:
        raise ConfigError(f"scenario.kind must be one of {', '.join(KINDS)}, got {kind!r}", seen["scenario.kind"])
    return cfg


def load_config(path: str | Path) -> Config:
    return parse_config(Path(path).read_text())


def dump_config(cfg: Config) -> str:
    lines = [f"{k} = {_format_value(key_kind(k), cfg.values[k])}" for k in sorted(cfg.values)]
    return "\n".join(lines) + "\n"
