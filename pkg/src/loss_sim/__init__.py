"""Patched cubic-spline wave simulator with absorbing layers and a spectral reference."""

from .config import Config, load_config, parse_config
from .errors import (
    ConfigError,
    DimensionError,
    DomainError,
    ExchangeError,
    HorizonError,
    LayoutError,
    LossError,
    NonFiniteError,
)
from .scenario import build_setup, run_scenario

__version__ = "0.1.0"

__all__ = [
    "Config",
    "ConfigError",
    "DimensionError",
    "DomainError",
    "ExchangeError",
    "HorizonError",
    "LayoutError",
    "LossError",
    "NonFiniteError",
    "build_setup",
    "load_config",
    "parse_config",
    "run_scenario",
]
