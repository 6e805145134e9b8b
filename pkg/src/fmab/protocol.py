"""Fed1-UCB / Fed2-UCB client and server state machines.

One episode is a synchronous loop of phases. In phase ``p`` the server admits
new clients (Fed2 only), every client pulls each active arm ``f(p)`` times in
round-robin order, uploads its running sample means, and the server removes
every arm whose upper bound falls below the leader's lower bound. When a
single arm is left all clients stay on it until the horizon without further
communication.

Client uploads are means over *all* pulls since that client's admission. For
Fed1 (everybody admitted at phase 1) this is the mean over ``F(p)`` pulls;
for Fed2 it gives the grouped statistic whose variance is ``sigma^2 eta_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .environments import Environment, LocalModel
from .errors import ConfigError, SynchronizationError
from .regret import RegretLedger
from .rng import stream
from .schedules import Schedule, eta_from_groups, eval_f, eval_g, phase_stats

#: Cap on quantisation bits; a float64 mantissa carries no more.
MAX_BITS = 52

#: Client cap applied when neither the caller nor the environment bounds the
#: population, so that doubling admission cannot exhaust memory.
DEFAULT_MAX_CLIENTS = 2**20


class Mode(str, Enum):
    FED1 = "fed1"
    FED2 = "fed2"
    CENTRALIZED = "centralized"


@dataclass(frozen=True)
class PrivacyMode:
    """How clients transform their means before upload.

    ``kind`` is ``"plain"``, ``"quantized"`` or ``"noisy"``. Noisy mode adds
    Gaussian noise of scale ``noise_scale + noise_rel * B`` where ``B`` is the
    current elimination radius.
    """

    kind: str = "plain"
    noise_scale: float = 0.0
    noise_rel: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("plain", "quantized", "noisy"):
            raise ConfigError(f"unknown privacy mode {self.kind!r}")
        if self.noise_scale < 0 or self.noise_rel < 0:
            raise ConfigError("noise scales must be non-negative")


PLAIN = PrivacyMode()


def quant_bits(term: float) -> int:
    """Bits per mean so that the grid spacing is at most half of ``term``.

    ``term`` is the arm-sampling radius (Fed1) or the client-sampling radius
    (Fed2); the result is ``ceil(1 + log2(1 / term))``, at least 1 and at most
    :data:`MAX_BITS`.
    """
    if term <= 0:
        return MAX_BITS
    return int(min(MAX_BITS, max(1, math.ceil(1.0 - math.log2(term)))))


def quantize_mean(x, bits: int):
    """Nearest point of the ``2**bits``-level grid ``{0, 1/(2^Q - 1), ..., 1}``.

    Ties go to the even grid index. Accepts scalars or arrays in ``[0, 1]``.
    """
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("quantize_mean expects values in [0, 1]")
    if bits < 1:
        raise ValueError(f"need at least one bit, got {bits}")
    levels = 2.0**bits - 1
    out = np.rint(arr * levels) / levels
    return float(out) if out.ndim == 0 else out


def inflate_bound(radius: float, term: float) -> float:
    """Elimination radius widened to absorb quantisation error."""
    return radius + term


def noisy_mean(x, noise_scale: float, rng: np.random.Generator):
    arr = np.asarray(x, dtype=float)
    if noise_scale == 0:
        return float(arr) if arr.ndim == 0 else arr.copy()
    out = arr + rng.normal(0.0, noise_scale, size=arr.shape)
    return float(out) if out.ndim == 0 else out


@dataclass
class ClientState:
    id: int
    local: LocalModel
    active: np.ndarray
    rng: np.random.Generator
    admitted_phase: int = 1
    committed: int | None = None
    sums: np.ndarray = field(default=None, repr=False)
    counts: np.ndarray = field(default=None, repr=False)
    pulls: np.ndarray = field(default=None, repr=False)
    noise_rng: np.random.Generator | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        K = self.local.mu.size
        self.active = np.array(self.active, dtype=np.int64)
        self.sums = np.zeros(K)
        self.counts = np.zeros(K, dtype=np.int64)
        self.pulls = np.zeros(K, dtype=np.int64)

    def running_means(self) -> np.ndarray:
        """Mean of all observations since admission, per active arm."""
        return self.sums[self.active] / self.counts[self.active]

    def drop(self, eliminated: np.ndarray) -> None:
        self.active = np.setdiff1d(self.active, eliminated)

    def commit(self, arm: int, slots: int) -> None:
        self.committed = int(arm)
        self.active = np.array([arm], dtype=np.int64)
        self.pulls[arm] += slots


def round_robin(active: np.ndarray, f_p: int, n_slots: int | None = None) -> np.ndarray:
    """Arm pulled at each slot of a phase: ``active`` repeated ``f_p`` times."""
    L = active.size * f_p if n_slots is None else min(n_slots, active.size * f_p)
    return np.tile(active, f_p)[:L]


def client_run_phase(
    c: ClientState,
    f_p: int,
    n_slots: int | None = None,
    log: list | None = None,
    phase: int = 0,
    pattern: np.ndarray | None = None,
) -> np.ndarray:
    """Pull every active arm ``f_p`` times, round-robin in ascending arm order.

    Returns this phase's sample mean per active arm (``nan`` for an arm with no
    pull in a truncated phase) and folds the observations into the client's
    running sums. ``n_slots`` truncates the phase at the horizon; ``pattern``
    passes a precomputed :func:`round_robin` sequence.
    """
    if c.committed is not None:
        raise RuntimeError(f"client {c.id} has already committed to arm {c.committed}")
    if f_p < 1:
        raise ValueError(f"f_p must be >= 1, got {f_p}")
    arms = round_robin(c.active, f_p, n_slots) if pattern is None else pattern
    L = arms.size
    obs = c.local.mu[arms] + c.local.sigma * c.rng.standard_normal(L)
    K = c.local.mu.size
    s = np.bincount(arms, weights=obs, minlength=K)
    n = np.bincount(arms, minlength=K)
    c.sums += s
    c.counts += n
    c.pulls += n
    if log is not None:
        log.append((np.full(L, c.id), np.full(L, phase), arms, obs))
    n_act = n[c.active]
    return np.divide(s[c.active], n_act, out=np.full(n_act.size, np.nan), where=n_act > 0)


@dataclass
class ServerState:
    mode: Mode
    active: np.ndarray
    phase: int = 1
    admitted: list[int] = field(default_factory=list)
    means: np.ndarray | None = None
    history: list[np.ndarray] = field(default_factory=list)

    @property
    def n_clients(self) -> int:
        return int(sum(self.admitted))


@dataclass(frozen=True)
class StepResult:
    eliminated: np.ndarray
    active: np.ndarray
    radius: float
    means: np.ndarray


def eliminate(active: np.ndarray, means: np.ndarray, radius: float) -> np.ndarray:
    """Arms with ``mean + radius <= max mean - radius``.

    The leader (lowest index among the maxima) is never returned, which only
    matters when ``radius == 0``.
    """
    leader = int(np.argmax(means))
    mask = means + radius <= means[leader] - radius
    mask[leader] = False
    return active[mask]


def _step(s: ServerState, client_means: np.ndarray, radius: float) -> StepResult:
    client_means = np.asarray(client_means, dtype=float)
    if client_means.ndim != 2 or client_means.shape != (s.n_clients, s.active.size):
        raise SynchronizationError(
            f"expected updates from {s.n_clients} clients on {s.active.size} arms, "
            f"got shape {client_means.shape}"
        )
    if np.any(np.isnan(client_means)):
        raise SynchronizationError("missing client update")
    means = client_means.mean(axis=0)
    gone = eliminate(s.active, means, radius)
    s.means = means
    s.history.append(gone)
    s.active = np.setdiff1d(s.active, gone)
    return StepResult(gone, s.active, radius, means)


def fed2_radius(s: Schedule, admitted: list[int], sigma: float, sigma_c: float) -> float:
    """``B_{p,2}`` for the realised admission groups (equals the schedule's
    value unless admission was capped)."""
    p = len(admitted)
    g = np.asarray(admitted, dtype=float)
    M = g.sum()
    eta = eta_from_groups(s.f_values(p), g)
    log_t = s.log_t
    return math.sqrt(6.0 * sigma**2 * eta * log_t) + math.sqrt(6.0 * sigma_c**2 * log_t / M)


def client_sampling_term(s: Schedule, n_clients: int, sigma_c: float) -> float:
    return math.sqrt(6.0 * sigma_c**2 * s.log_t / n_clients)


def server_step_fed2(
    s: ServerState, sched: Schedule, client_means: np.ndarray, sigma: float, sigma_c: float,
    inflation: float = 0.0,
) -> StepResult:
    """Aggregate uploads and eliminate with the double radius ``B_{p,2}``."""
    radius = fed2_radius(sched, s.admitted, sigma, sigma_c) + inflation
    return _step(s, client_means, radius)


def server_step_fed1(
    s: ServerState, sched: Schedule, client_means: np.ndarray, sigma: float, inflation: float = 0.0
) -> StepResult:
    """Aggregate uploads and eliminate with ``B_{p,1}`` (fixed population)."""
    radius = phase_stats(sched, s.phase, sigma, n_clients=s.n_clients).B_p1 + inflation
    return _step(s, client_means, radius)


@dataclass(frozen=True)
class CommEvent:
    slot: int
    n_clients: int
    payload_bits: int | None = None


@dataclass(frozen=True)
class PhaseRecord:
    p: int
    t_start: int
    t_end: int
    n_clients: int
    f_p: int
    arms: tuple[int, ...]
    means: tuple[float, ...]
    radius: float
    eliminated: tuple[int, ...]
    comm_cumulative: float
    payload_bits: int | None = None


PHASE_COLUMNS = ("p", "t_start", "t_end", "M_p", "f_p", "K_p", "B", "eliminated", "comm_cumulative", "payload_bits")


def phase_row(r: PhaseRecord) -> tuple:
    return (
        r.p, r.t_start, r.t_end, r.n_clients, r.f_p, len(r.arms), r.radius,
        " ".join(map(str, r.eliminated)), r.comm_cumulative,
        "" if r.payload_bits is None else r.payload_bits,
    )


@dataclass
class EpisodeResult:
    ledger: RegretLedger
    best_arm: int
    final_arm: int
    committed: bool
    commit_slot: int | None
    phases: int
    n_clients: int
    phase_log: list[PhaseRecord]
    comm_events: list[CommEvent]
    pull_counts: np.ndarray
    observations: np.ndarray | None = None

    @property
    def correct(self) -> bool:
        return self.final_arm == self.best_arm

    @property
    def commit_correct(self) -> bool:
        return self.committed and self.correct


OBS_DTYPE = np.dtype([("client", np.int64), ("phase", np.int64), ("arm", np.int64), ("value", float)])


def run_episode(
    mode: Mode | str,
    env: Environment,
    schedule: Schedule,
    cost: float = 1.0,
    seed: int = 0,
    rep: int = 0,
    privacy: PrivacyMode = PLAIN,
    n_clients: int | None = None,
    max_clients: int | None = None,
    sigma_c: float | None = None,
    record_observations: bool = False,
) -> EpisodeResult:
    """Simulate one episode of ``mode`` on ``env`` up to ``schedule.horizon``.

    Fed1 and centralized runs use a fixed population of ``n_clients`` (default:
    all clients of an exact environment). Fed2 admits ``g(p)`` clients per phase,
    capped by ``max_clients``, by the environment's population and by
    :data:`DEFAULT_MAX_CLIENTS`. The
    client-sampling scale in ``B_{p,2}`` defaults to the environment's
    ``sigma_c`` (zero for exact environments).
    """
    mode = Mode(mode)
    T = int(schedule.horizon)
    if mode is Mode.FED2 and schedule.is_fed1:
        raise ConfigError("Fed2-UCB needs an admission schedule g(p)")
    if mode is not Mode.FED2 and not schedule.is_fed1:
        raise ConfigError(f"{mode.value} runs use a fixed population; set g_kind to none")
    if cost < 0:
        raise ConfigError("communication cost must be non-negative")
    if privacy.kind == "quantized" and not env.locals_in_unit_interval():
        raise ConfigError("quantized uploads need every local mean inside [0, 1]")

    gm = env.global_model
    sigma = gm.sigma
    if sigma_c is None:
        sigma_c = getattr(env, "sigma_c", 0.0)
    cap = min(x for x in (max_clients, env.max_clients, DEFAULT_MAX_CLIENTS) if x is not None)
    if mode is not Mode.FED2:
        if n_clients is None:
            n_clients = env.max_clients
        if n_clients is None or n_clients < 1:
            raise ConfigError("a fixed-population run needs n_clients >= 1")
        if n_clients > cap:
            raise ConfigError(f"n_clients={n_clients} exceeds the available {cap}")

    K = gm.n_arms
    ledger = RegretLedger(gm.gaps, T, cost)
    server = ServerState(mode, np.arange(K, dtype=np.int64))
    clients: list[ClientState] = []
    phase_log: list[PhaseRecord] = []
    events: list[CommEvent] = []
    obs_log: list | None = [] if record_observations else None

    def admit(p: int) -> None:
        if mode is Mode.FED2:
            want = eval_g(schedule, p)
        else:
            want = n_clients if p == 1 else 0
        n_new = int(max(0, min(want, cap - len(clients))))
        for _ in range(n_new):
            cid = len(clients)
            c = ClientState(
                cid, env.local_model(cid, seed, rep), server.active, stream(seed, rep, cid, "obs"), admitted_phase=p
            )
            if privacy.kind == "noisy":
                c.noise_rng = stream(seed, rep, cid, "noise")
            clients.append(c)
        server.admitted.append(n_new)

    t = 0
    p = 1
    commit_slot = None
    admit(1)
    if not clients:
        raise ConfigError("no clients admitted in the first phase")

    while server.active.size > 1 and t < T:
        p = server.phase
        M = len(clients)
        f_p = eval_f(schedule, p)
        K_p = server.active.size
        L = K_p * f_p
        n_slots = min(L, T - t)
        pattern = round_robin(server.active, f_p, n_slots)
        for c in clients:
            client_run_phase(c, f_p, n_slots, obs_log, phase=p, pattern=pattern)
        ledger.accrue_pulls(t, pattern, M, phase=p, n_active=K_p)
        t_start, t = t, t + n_slots
        if n_slots < L:
            break  # horizon reached mid-phase: no elimination on partial data

        uploads = np.vstack([c.running_means() for c in clients])
        if mode is Mode.FED2:
            base = fed2_radius(schedule, server.admitted, sigma, sigma_c)
            q_term = client_sampling_term(schedule, M, sigma_c)
        else:
            base = phase_stats(schedule, p, sigma, n_clients=M).B_p1
            q_term = base
        bits = None
        inflation = 0.0
        if privacy.kind == "quantized":
            bits = quant_bits(q_term)
            uploads = quantize_mean(np.clip(uploads, 0.0, 1.0), bits)
            inflation = q_term
        elif privacy.kind == "noisy":
            scale = privacy.noise_scale + privacy.noise_rel * base
            uploads = np.vstack([noisy_mean(u, scale, c.noise_rng) for u, c in zip(uploads, clients)])

        if mode is not Mode.CENTRALIZED:
            ledger.accrue_comm(t - 1, M)
            events.append(CommEvent(t - 1, M, bits))
        arms_before = tuple(int(a) for a in server.active)
        if mode is Mode.FED2:
            res = server_step_fed2(server, schedule, uploads, sigma, sigma_c, inflation)
        else:
            res = server_step_fed1(server, schedule, uploads, sigma, inflation)
        for c in clients:
            # every client holds the same (never mutated) active-set array
            c.active = server.active
        phase_log.append(
            PhaseRecord(
                p, t_start, t, M, f_p, arms_before, tuple(float(m) for m in res.means), res.radius,
                tuple(int(a) for a in res.eliminated), ledger.comm_total_so_far, bits,
            )
        )
        server.phase += 1
        if server.active.size > 1 and t < T:
            admit(server.phase)

    M = len(clients)
    committed = server.active.size == 1
    if committed:
        arm = int(server.active[0])
        commit_slot = t
        rest = T - t
        for c in clients:
            c.commit(arm, rest)
        ledger.accrue_pulls(t, np.full(rest, arm, dtype=np.int64), M, phase=server.phase, n_active=1)
        final_arm = arm
    elif server.means is not None:
        # server.active is a subset of the arms the last means were computed on
        last_arms = np.array(phase_log[-1].arms)
        keep = np.isin(last_arms, server.active)
        final_arm = int(last_arms[keep][np.argmax(server.means[keep])])
    else:
        final_arm = int(server.active[0])

    if mode is Mode.CENTRALIZED:
        ledger.accrue_comm_span(0, T, M)

    pulls = np.sum([c.pulls for c in clients], axis=0)
    observations = None
    if obs_log is not None:
        observations = np.empty(sum(len(x[0]) for x in obs_log), dtype=OBS_DTYPE)
        if obs_log:
            for name, col in zip(OBS_DTYPE.names, zip(*obs_log)):
                observations[name] = np.concatenate(col)
    return EpisodeResult(
        ledger=ledger,
        best_arm=gm.best_arm,
        final_arm=final_arm,
        committed=committed,
        commit_slot=commit_slot,
        phases=len(phase_log),
        n_clients=M,
        phase_log=phase_log,
        comm_events=events,
        pull_counts=pulls,
        observations=observations,
    )
