"""Configuration, sweeps, slope fits and the command line."""

from .config import ConfigError, ExperimentConfig, load_config
from .fit import fit_slope
from .sweep import run_sweep

__all__ = ["ConfigError", "ExperimentConfig", "fit_slope", "load_config", "run_sweep"]
