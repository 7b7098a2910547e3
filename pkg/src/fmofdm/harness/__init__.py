"""Experiment configuration, Monte Carlo runner, exporters and CLI."""

from .config import SCENARIOS, WAVEFORMS, ConfigError, ExperimentConfig, build_config, read_config_file
from .export import CSV_HEADER, export_csv, export_rdm
from .runner import ExperimentResult, run_experiment

__all__ = [
    "CSV_HEADER",
    "SCENARIOS",
    "WAVEFORMS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "build_config",
    "export_csv",
    "export_rdm",
    "read_config_file",
    "run_experiment",
]
