"""Single-player improved UCB run directly on the global model.

Round ``m`` keeps a gap estimate ``d = 2^-m``. Every active arm is pulled until
it has ``n_m = ceil(2 ln(T d^2) / d^2)`` samples; arms whose mean plus
``sqrt(ln(T d^2) / (2 n_m))`` falls below the best mean minus the same radius
are dropped, and ``d`` is halved. Once ``T d^2 <= e`` the remaining arms are
played round-robin to the horizon. One player, so no communication.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .environments import GlobalModel
from .errors import ConfigError
from .regret import RegretLedger
from .rng import stream


@dataclass
class BaselineState:
    active: np.ndarray
    gap_estimate: float = 1.0
    round: int = 0
    counts: np.ndarray = field(default=None, repr=False)
    sums: np.ndarray = field(default=None, repr=False)


@dataclass
class BaselineResult:
    ledger: RegretLedger
    best_arm: int
    final_arm: int
    committed: bool
    commit_slot: int | None
    rounds: int
    pull_counts: np.ndarray
    radii: list[float]

    @property
    def correct(self) -> bool:
        return self.final_arm == self.best_arm


def round_target(horizon: int, d: float) -> int:
    return math.ceil(2.0 * math.log(horizon * d * d) / (d * d))


def round_radius(horizon: int, d: float, n: int) -> float:
    return math.sqrt(math.log(horizon * d * d) / (2.0 * n))


def baseline_run(g: GlobalModel, horizon: int, seed: int = 0, rep: int = 0) -> BaselineResult:
    T = int(horizon)
    K = g.n_arms
    if T < K:
        raise ConfigError(f"horizon {T} shorter than the number of arms {K}")
    rng = stream(seed, rep, "baseline")
    ledger = RegretLedger(g.gaps, T, cost=0.0)
    st = BaselineState(np.arange(K, dtype=np.int64))
    st.counts = np.zeros(K, dtype=np.int64)
    st.sums = np.zeros(K)
    radii: list[float] = []
    t = 0

    def play(arms: np.ndarray) -> None:
        nonlocal t
        arms = arms[: T - t]
        obs = g.mu[arms] + g.sigma * rng.standard_normal(arms.size)
        st.sums += np.bincount(arms, weights=obs, minlength=K)
        st.counts += np.bincount(arms, minlength=K)
        ledger.accrue_pulls(t, arms, 1, phase=st.round + 1, n_active=st.active.size)
        t += arms.size

    while st.active.size > 1 and t < T and T * st.gap_estimate**2 > math.e:
        d = st.gap_estimate
        n_m = round_target(T, d)
        extra = n_m - int(st.counts[st.active[0]])
        if extra > 0:
            play(np.tile(st.active, extra))
        if int(st.counts[st.active].min()) < n_m:
            break  # horizon hit inside the round
        r = round_radius(T, d, n_m)
        radii.append(r)
        means = st.sums[st.active] / st.counts[st.active]
        keep = means + r >= means.max() - r
        st.active = st.active[keep]
        st.gap_estimate = d / 2.0
        st.round += 1

    committed = st.active.size == 1
    commit_slot = None
    if committed:
        commit_slot = t
        rest = T - t
        ledger.accrue_pulls(t, np.full(rest, st.active[0]), 1, phase=st.round + 1, n_active=1)
        st.counts[st.active[0]] += rest
        t = T
    elif t < T:
        # out of rounds: keep cycling through the survivors
        play(np.resize(st.active, T - t))
    means = np.where(st.counts > 0, st.sums / np.maximum(st.counts, 1), -np.inf)
    final = int(st.active[np.argmax(means[st.active])])
    return BaselineResult(ledger, g.best_arm, final, committed, commit_slot, st.round, st.counts.copy(), radii)
