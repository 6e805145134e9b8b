"""Pseudo-regret bookkeeping.

Regret is the sum of two sub-ledgers kept per time slot:

* exploration: every client pulling arm ``k`` at slot ``t`` adds the *global*
  gap ``mu_* - mu_k`` (realised observations never enter);
* communication: every communication round adds ``C`` per participating client.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

#: Trace CSV columns, in order.
TRACE_COLUMNS = ("run_id", "t", "M_t", "regret_explore", "regret_comm", "regret_total", "phase", "K_p")


@dataclass(frozen=True)
class CommSpan:
    """``n_clients`` communicate at every slot in ``[start, stop)``."""

    start: int
    stop: int
    n_clients: int

    @property
    def rounds(self) -> int:
        return self.stop - self.start


class RegretLedger:
    """Slot-indexed exploration and communication losses for one episode."""

    def __init__(self, gaps: np.ndarray, horizon: int, cost: float):
        gaps = np.asarray(gaps, dtype=float)
        if np.any(gaps < 0):
            raise ValueError("gaps must be non-negative")
        self.gaps = gaps
        self.horizon = int(horizon)
        self.cost = float(cost)
        self.explore = np.zeros(self.horizon)
        self.comm = np.zeros(self.horizon)
        self.clients = np.zeros(self.horizon, dtype=np.int64)
        self.phase = np.zeros(self.horizon, dtype=np.int64)
        self.n_active = np.zeros(self.horizon, dtype=np.int64)
        self.comm_spans: list[CommSpan] = []
        self.comm_total_so_far = 0.0

    def _arm_gaps(self, arms: np.ndarray) -> np.ndarray:
        arms = np.asarray(arms)
        if arms.size and (arms.min() < 0 or arms.max() >= self.gaps.size):
            raise IndexError(f"unknown arm in {arms.min()}..{arms.max()} (have {self.gaps.size})")
        return self.gaps[arms]

    def accrue_pull(self, t: int, arm: int, n_clients: int = 1) -> None:
        """``n_clients`` clients pull ``arm`` at slot ``t``."""
        self.explore[t] += n_clients * self._arm_gaps(np.array([arm]))[0]
        self.clients[t] = n_clients

    def accrue_pulls(
        self, start: int, arms: np.ndarray, n_clients: int, phase: int = 0, n_active: int = 0
    ) -> None:
        """Slots ``start, start+1, ...`` with all ``n_clients`` clients on ``arms[i]``."""
        stop = start + len(arms)
        self.explore[start:stop] += n_clients * self._arm_gaps(arms)
        self.clients[start:stop] = n_clients
        self.phase[start:stop] = phase
        self.n_active[start:stop] = n_active

    def accrue_comm(self, t: int, n_clients: int) -> None:
        """One communication round at slot ``t``."""
        self.accrue_comm_span(t, t + 1, n_clients)

    def accrue_comm_span(self, start: int, stop: int, n_clients: int) -> None:
        if stop <= start:
            return
        self.comm[start:stop] += self.cost * n_clients
        self.comm_total_so_far += self.cost * n_clients * (stop - start)
        self.comm_spans.append(CommSpan(start, stop, n_clients))

    @property
    def comm_rounds(self) -> int:
        """``T_c``, the number of slots with communication."""
        return sum(s.rounds for s in self.comm_spans)

    @property
    def explore_total(self) -> float:
        return float(self.explore.sum())

    @property
    def comm_total(self) -> float:
        return float(self.comm.sum())

    @property
    def total(self) -> float:
        return self.explore_total + self.comm_total

    def cumulative(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ex = np.cumsum(self.explore)
        co = np.cumsum(self.comm)
        return ex, co, ex + co

    def checkpoints(self, n_points: int = 2000) -> np.ndarray:
        """1-based slot counts ``step, 2 step, ..., T`` with ``step = ceil(T / n_points)``."""
        step = math.ceil(self.horizon / n_points)
        pts = np.arange(step, self.horizon + 1, step)
        if pts.size == 0 or pts[-1] != self.horizon:
            pts = np.append(pts, self.horizon)
        return pts

    def trace_rows(self, run_id: str, n_points: int = 2000) -> list[tuple]:
        ex, co, tot = self.cumulative()
        rows = []
        for t in self.checkpoints(n_points):
            i = t - 1
            rows.append(
                (run_id, int(t), int(self.clients[i]), float(ex[i]), float(co[i]), float(tot[i]),
                 int(self.phase[i]), int(self.n_active[i]))
            )
        return rows


def recount_explore(gaps: np.ndarray, pull_counts: np.ndarray) -> float:
    """``sum_k gap_k N(k)`` from per-arm client-pull counts."""
    return float(np.dot(np.asarray(gaps, dtype=float), np.asarray(pull_counts, dtype=float)))


def recount_comm(cost: float, spans: list[CommSpan]) -> float:
    return float(cost * sum(s.rounds * s.n_clients for s in spans))


def exact_model_total(ledger: RegretLedger, n_clients: int) -> float:
    """Regret under a fixed population: exploration + ``C M T_c``.

    Raises if the ledger's communication rounds did not all involve
    ``n_clients`` clients.
    """
    if any(s.n_clients != n_clients for s in ledger.comm_spans):
        raise ValueError("ledger has rounds with a varying client count")
    total = ledger.explore_total + ledger.cost * n_clients * ledger.comm_rounds
    if not math.isclose(total, ledger.total, rel_tol=1e-12, abs_tol=1e-9):
        raise ValueError(f"exact-model total {total} disagrees with ledger total {ledger.total}")
    return total
