"""Configuration, replicated runs, comparisons and the preset registry."""

from .compare import compare_runs, load_run
from .config import (
    ExperimentConfig,
    PzSweepConfig,
    list_presets,
    load_config,
    load_preset,
    parse_config,
)
from .runner import run_experiment, run_pz_sweep, run_replication, run_single, summarize_traces

__all__ = [
    "ExperimentConfig",
    "PzSweepConfig",
    "compare_runs",
    "list_presets",
    "load_config",
    "load_preset",
    "load_run",
    "parse_config",
    "run_experiment",
    "run_pz_sweep",
    "run_replication",
    "run_single",
    "summarize_traces",
]
