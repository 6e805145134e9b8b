"""Per-phase pull and admission schedules, confidence radii and phase thresholds.

A schedule fixes two sequences indexed by the phase ``p >= 1``:

* ``f(p)``: pulls of every active arm each client performs in phase ``p``;
* ``g(p)``: clients the server admits at the start of phase ``p`` (Fed2-UCB).

Everything else in this module is derived from them: cumulative pulls
``F(p)``, admitted clients ``M(p)``, the grouping weight ``eta_p`` and the two
elimination radii. Logarithms are natural throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError

#: Returned by the phase-threshold searches when no phase that still fits in
#: the horizon satisfies the elimination condition.
BEYOND_HORIZON = math.inf

#: Upper limit on the number of phases a threshold search will consider.
MAX_SCAN_PHASES = 10**6


class FKind(str, Enum):
    CONSTANT = "constant"  # kappa
    CEIL_LOG = "ceil_log"  # ceil(kappa * ln T)
    POW2 = "pow2"  # 2^p
    CEIL_POW2_LOG = "ceil_pow2_log"  # ceil(2^p * ln T)


class GKind(str, Enum):
    NONE = "none"  # Fed1-UCB: fixed client population, no admission
    CONSTANT = "constant"  # lambda
    CEIL_LOG = "ceil_log"  # ceil(lambda * ln T)
    POW2 = "pow2"  # 2^p
    CEIL_POW2_LOG = "ceil_pow2_log"  # ceil(2^p * ln T)
    ONCE = "once"  # lambda at p = 1, zero afterwards


def _check_param(kind: Enum, value: float, name: str) -> None:
    if kind.value == "constant":
        if value != int(value) or value < 1:
            raise ConfigError(f"{name} must be a positive integer for constant schedules, got {value}")
    elif kind.value in ("ceil_log", "once"):
        if not value > 0:
            raise ConfigError(f"{name} must be positive, got {value}")


@dataclass(frozen=True)
class Schedule:
    """The pair ``(f, g)`` together with the horizon ``T`` used in ``ln T``.

    ``horizon`` is normally an integer slot count; real values >= 2 are accepted
    so that closed-form checks can pick convenient logarithms.
    """

    f_kind: FKind
    horizon: float
    kappa: float = 1.0
    g_kind: GKind = GKind.NONE
    lam: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "f_kind", FKind(self.f_kind))
        object.__setattr__(self, "g_kind", GKind(self.g_kind))
        if not self.horizon >= 2:
            raise ConfigError(f"horizon must be at least 2 so that ln T > 0, got {self.horizon}")
        _check_param(self.f_kind, self.kappa, "kappa")
        if self.g_kind is not GKind.NONE:
            _check_param(self.g_kind, self.lam, "lambda")

    @property
    def log_t(self) -> float:
        return math.log(self.horizon)

    @property
    def is_fed1(self) -> bool:
        return self.g_kind is GKind.NONE

    def f(self, p: int) -> int:
        return eval_f(self, p)

    def g(self, p: int) -> int:
        return eval_g(self, p)

    def f_values(self, p: int) -> np.ndarray:
        """``f(1), ..., f(p)`` as float64 (exact for values below 2**53)."""
        q = np.arange(1, p + 1, dtype=float)
        return _family(self.f_kind.value, self.kappa, q, self.log_t)

    def g_values(self, p: int) -> np.ndarray:
        if self.g_kind is GKind.NONE:
            raise ConfigError("Fed1-UCB schedule (no admission) used where Fed2-UCB is required")
        q = np.arange(1, p + 1, dtype=float)
        if self.g_kind is GKind.ONCE:
            out = np.zeros(p)
            if p:
                out[0] = math.ceil(self.lam)
            return out
        return _family(self.g_kind.value, self.lam, q, self.log_t)

    def cumulative_f(self, p: int) -> float:
        """``F(p)`` with ``F(0) = 0``."""
        return float(self.f_values(p).sum())

    def cumulative_g(self, p: int) -> float:
        """``M(p)``, the number of clients admitted through phase ``p``."""
        return float(self.g_values(p).sum())


def _family(kind: str, param: float, q: np.ndarray, log_t: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        if kind == "constant":
            return np.full(q.shape, float(param))
        if kind == "ceil_log":
            return np.full(q.shape, float(math.ceil(param * log_t)))
        if kind == "pow2":
            return np.exp2(q)
        if kind == "ceil_pow2_log":
            return np.ceil(np.exp2(q) * log_t)
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _check_phase(s: Schedule, p: int) -> None:
    if p < 1:
        raise ConfigError(f"phase index must be >= 1, got {p}")


def eval_f(s: Schedule, p: int) -> int:
    """Pulls per active arm per client in phase ``p``."""
    _check_phase(s, p)
    if s.f_kind is FKind.CONSTANT:
        return int(s.kappa)
    if s.f_kind is FKind.CEIL_LOG:
        return math.ceil(s.kappa * s.log_t)
    if s.f_kind is FKind.POW2:
        return 2**p
    return math.ceil(2**p * s.log_t)


def eval_g(s: Schedule, p: int) -> int:
    """Clients admitted at the start of phase ``p``."""
    _check_phase(s, p)
    kind = s.g_kind
    if kind is GKind.NONE:
        raise ConfigError("Fed1-UCB schedule (no admission) used where Fed2-UCB is required")
    if kind is GKind.CONSTANT:
        return int(s.lam)
    if kind is GKind.CEIL_LOG:
        return math.ceil(s.lam * s.log_t)
    if kind is GKind.POW2:
        return 2**p
    if kind is GKind.ONCE:
        return math.ceil(s.lam) if p == 1 else 0
    return math.ceil(2**p * s.log_t)


@dataclass(frozen=True)
class PhaseStats:
    p: int
    F_p: float
    M_p: float
    eta_p: float
    B_p1: float | None = None
    B_p2: float | None = None

    @property
    def radius(self) -> float:
        return self.B_p1 if self.B_p1 is not None else self.B_p2


def eta_from_groups(f_vals: np.ndarray, g_vals: np.ndarray) -> float:
    """``eta_p`` for the admission groups of phases ``1..p``.

    Group ``q`` (``g(q)`` clients) has pulled each surviving arm
    ``F(p) - F(q-1)`` times by the end of phase ``p``.
    """
    F = np.cumsum(f_vals)
    F_prev = np.concatenate(([0.0], F[:-1]))
    pulls = F[-1] - F_prev
    M = g_vals.sum()
    return float(np.sum(g_vals / pulls) / (M * M))


def phase_stats(
    s: Schedule,
    p: int,
    sigma: float,
    sigma_c: float = 0.0,
    n_clients: int | None = None,
) -> PhaseStats:
    """Derived quantities of phase ``p``.

    With ``n_clients`` given and no admission schedule (Fed1 mode) the client
    population is fixed and only ``B_p1`` is set; otherwise ``B_p2`` is set.
    """
    _check_phase(s, p)
    if sigma < 0 or sigma_c < 0:
        raise ConfigError("noise scales must be non-negative")
    f_vals = s.f_values(p)
    F_p = float(f_vals.sum())
    log_t = s.log_t
    if n_clients is not None:
        if not s.is_fed1:
            raise ConfigError("fixed client count given together with an admission schedule")
        if n_clients < 1:
            raise ConfigError(f"Fed1 mode needs at least one client, got {n_clients}")
        eta = 1.0 / (n_clients * F_p)
        b1 = math.sqrt(6.0 * sigma**2 * log_t / (n_clients * F_p))
        return PhaseStats(p, F_p, float(n_clients), eta, B_p1=b1)

    g_vals = s.g_values(p)
    M_p = float(g_vals.sum())
    if M_p < 1:
        raise ConfigError(f"no clients admitted by phase {p}")
    eta = eta_from_groups(f_vals, g_vals)
    b2 = math.sqrt(6.0 * sigma**2 * eta * log_t) + math.sqrt(6.0 * sigma_c**2 * log_t / M_p)
    return PhaseStats(p, F_p, M_p, eta, B_p2=b2)


def fed2_condition(stats: PhaseStats, sigma: float, sigma_c: float, log_t: float, gap: float) -> bool:
    lhs = 96.0 * (sigma * math.sqrt(stats.eta_p) + sigma_c / math.sqrt(stats.M_p)) ** 2 * log_t
    return lhs <= gap * gap


def fed1_condition(n_clients: int, F_p: float, sigma: float, log_t: float, gap: float) -> bool:
    return n_clients * F_p >= 96.0 * sigma**2 * log_t / (gap * gap)


def _phase_limit(s: Schedule, n_arms: int) -> int:
    """Number of leading phases whose ``n_arms * f(q)`` slots fit in the horizon."""
    cap = min(MAX_SCAN_PHASES, int(s.horizon // n_arms))
    if cap < 1:
        return 0
    with np.errstate(over="ignore"):
        # doubling schedules overflow to inf long before cap; inf sorts last
        slots = np.cumsum(n_arms * s.f_values(cap))
    return int(np.searchsorted(slots, s.horizon, side="right"))


def phase_threshold_fed1(
    n_clients: int, s: Schedule, sigma: float, gap: float, n_arms: int = 1
) -> int | float:
    """Smallest ``p`` with ``M F(p) >= 96 sigma^2 ln T / gap^2``.

    Only phases whose cumulative ``n_arms * f`` slots fit in the horizon are
    considered; otherwise :data:`BEYOND_HORIZON` is returned.
    """
    if n_clients < 1 or not gap > 0:
        raise ConfigError("need n_clients >= 1 and a positive gap")
    limit = _phase_limit(s, n_arms)
    if limit == 0:
        return BEYOND_HORIZON
    F = np.cumsum(s.f_values(limit))
    need = 96.0 * sigma**2 * s.log_t / (gap * gap)
    ok = np.flatnonzero(n_clients * F >= need)
    return int(ok[0]) + 1 if ok.size else BEYOND_HORIZON


def phase_threshold_fed2(
    s: Schedule, sigma: float, sigma_c: float, gap: float, n_arms: int = 1
) -> int | float:
    """Smallest ``p`` with ``96 (sigma sqrt(eta_p) + sigma_c / sqrt(M_p))^2 ln T <= gap^2``.

    The left side is non-increasing in ``p`` (each group's pull count grows and
    ``M_p`` never shrinks), so a galloping search followed by bisection returns
    the same phase as a linear scan at ``O(p log p)`` cost.
    """
    if not gap > 0:
        raise ConfigError("gap must be positive")
    limit = _phase_limit(s, n_arms)
    log_t = s.log_t

    def holds(p: int) -> bool:
        if s.cumulative_g(p) < 1:
            return False
        st = phase_stats(s, p, sigma, sigma_c)
        if not (math.isfinite(st.M_p) and math.isfinite(st.eta_p)):
            return False
        return fed2_condition(st, sigma, sigma_c, log_t, gap)

    if limit == 0:
        return BEYOND_HORIZON
    lo, hi = 0, 1
    while not holds(hi):
        if hi >= limit:
            return BEYOND_HORIZON
        lo, hi = hi, min(2 * hi, limit)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if holds(mid):
            hi = mid
        else:
            lo = mid
    return hi
