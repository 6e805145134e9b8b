"""Federated multi-armed bandits: Fed1-UCB and Fed2-UCB simulation.

Clients play local bandit models whose average (exactly, or in distribution)
is a hidden global model; a server aggregates uploaded sample means once per
phase and eliminates arms with a confidence radius. The package provides the
schedules and radii, environments, the synchronous protocol, a single-player
improved-UCB baseline, regret ledgers, a client-sampling failure estimator
and an experiment harness.
"""

from .baseline import BaselineResult, baseline_run
from .environments import (
    ApproximateEnv,
    ExactEnv,
    GlobalModel,
    LocalModel,
    build_empirical_env,
    build_exact_env,
    build_synthetic_global,
    sample_local_model,
)
from .errors import ConfigError, SynchronizationError
from .protocol import EpisodeResult, Mode, PrivacyMode, quant_bits, quantize_mean, run_episode
from .regret import RegretLedger
from .schedules import (
    FKind,
    GKind,
    PhaseStats,
    Schedule,
    phase_stats,
    phase_threshold_fed1,
    phase_threshold_fed2,
)
from .verification import PzEstimate, estimate_pz, pz_two_arm_gaussian, required_clients

__version__ = "0.1.0"

__all__ = [
    "ApproximateEnv",
    "BaselineResult",
    "ConfigError",
    "EpisodeResult",
    "ExactEnv",
    "FKind",
    "GKind",
    "GlobalModel",
    "LocalModel",
    "Mode",
    "PhaseStats",
    "PrivacyMode",
    "PzEstimate",
    "RegretLedger",
    "Schedule",
    "SynchronizationError",
    "baseline_run",
    "build_empirical_env",
    "build_exact_env",
    "build_synthetic_global",
    "estimate_pz",
    "phase_stats",
    "phase_threshold_fed1",
    "phase_threshold_fed2",
    "pz_two_arm_gaussian",
    "quant_bits",
    "quantize_mean",
    "required_clients",
    "run_episode",
    "sample_local_model",
]
