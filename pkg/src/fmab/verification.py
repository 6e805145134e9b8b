"""Client-sampling failure probability.

With ``M`` clients whose local means are ``N(mu_k, sigma_c^2)`` draws, the
averaged local model fails when the globally optimal arm does not come out
strictly on top of it. The probability of that event (called ``P_z`` and,
elsewhere, ``P_e``; the same quantity) decays exponentially in ``M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .environments import GlobalModel
from .errors import ConfigError
from .rng import stream


@dataclass(frozen=True)
class PzEstimate:
    M: int
    estimate: float
    std_error: float
    n_trials: int


def _estimate(M: int, failures: int, n_trials: int) -> PzEstimate:
    est = failures / n_trials
    return PzEstimate(M, est, math.sqrt(est * (1.0 - est) / n_trials), n_trials)


def estimate_pz_sweep(
    g: GlobalModel, sigma_c: float, Ms: Iterable[int], n_trials: int, seed: int
) -> list[PzEstimate]:
    """Monte Carlo failure frequencies for every ``M`` in ``Ms``.

    Trial ``i`` draws its clients from stream ``(seed, i)``, and the first
    ``M`` clients of a trial are shared by every ``M`` (common random numbers),
    so the estimate for a given ``M`` does not depend on the other entries.
    """
    Ms = [int(m) for m in Ms]
    if not Ms or min(Ms) < 1:
        raise ConfigError("client counts must be >= 1")
    if n_trials < 1:
        raise ConfigError("need at least one trial")
    K = g.n_arms
    best = g.best_arm
    m_max = max(Ms)
    idx = np.array(Ms) - 1
    others = np.arange(K) != best
    failures = np.zeros(len(Ms), dtype=np.int64)
    for i in range(n_trials):
        z = stream(seed, i, "pz").standard_normal((m_max, K))
        avg = g.mu + sigma_c * (np.cumsum(z, axis=0)[idx] / (idx + 1)[:, None])
        if K > 1:
            failures += avg[:, best] <= avg[:, others].max(axis=1)
    return [_estimate(m, int(f), n_trials) for m, f in zip(Ms, failures)]


def estimate_pz(g: GlobalModel, sigma_c: float, M: int, n_trials: int, seed: int) -> PzEstimate:
    """Failure frequency of the ``M``-client averaged model over ``n_trials``."""
    return estimate_pz_sweep(g, sigma_c, [M], n_trials, seed)[0]


def pz_two_arm_gaussian(gap: float, sigma_c: float, M: int) -> float:
    """Exact failure probability for two arms: ``Phi(-gap sqrt(M) / (sigma_c sqrt 2))``."""
    if sigma_c == 0:
        return 0.0
    z = gap * math.sqrt(M) / (sigma_c * math.sqrt(2.0))
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def required_clients(sigma_c: float, gap: float, n_arms: int, horizon: float) -> int:
    """Order-level client count ``ceil(sigma_c^2 ln(K T) / gap^2)``, at least 1.

    The underlying bound has an unspecified constant; this uses 1.
    """
    if not gap > 0:
        raise ConfigError("gap must be positive")
    return max(1, math.ceil(sigma_c**2 * math.log(n_arms * horizon) / gap**2))
