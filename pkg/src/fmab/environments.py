"""Global and local bandit models.

The global model is the hidden game on which reward (and regret) is counted.
Clients only ever observe their own local model. Three relationships between
the two are supported:

* approximate -- each client's local means are an independent Gaussian draw
  around the global means (scale ``sigma_c``);
* exact -- a fixed set of local models whose per-arm average *is* the global
  model;
* empirical -- an exact environment built from a ratings table.

Observation noise is Gaussian with scale ``sigma`` in every case.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .rng import stream


@dataclass(frozen=True)
class GlobalModel:
    mu: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        mu = np.array(self.mu, dtype=float)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if mu.ndim != 1 or mu.size < 1:
            raise ConfigError("global means must be a non-empty vector")
        if not np.all(np.isfinite(mu)):
            raise ConfigError("global means must be finite")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        if mu.size > 1 and np.count_nonzero(mu == mu.max()) > 1:
            raise ConfigError("the global optimal arm must be unique")

    @property
    def n_arms(self) -> int:
        return self.mu.size

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.mu))

    @property
    def best_mean(self) -> float:
        return float(self.mu.max())

    @property
    def gaps(self) -> np.ndarray:
        return self.best_mean - self.mu

    @property
    def min_gap(self) -> float:
        """Smallest positive gap; ``inf`` for a single-arm game."""
        g = self.gaps
        g = g[g > 0]
        return float(g.min()) if g.size else math.inf


@dataclass(frozen=True)
class LocalModel:
    client: int
    mu: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        mu = np.array(self.mu, dtype=float)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if not np.all(np.isfinite(mu)):
            raise ConfigError(f"local means of client {self.client} must be finite")

    def observe(self, k: int, rng: np.random.Generator) -> float:
        return observe(self, k, rng)


def observe(local: LocalModel, k: int, rng: np.random.Generator) -> float:
    """One Gaussian observation of arm ``k`` on ``local``."""
    if not 0 <= k < local.mu.size:
        raise IndexError(f"arm {k} out of range for {local.mu.size} arms")
    return float(rng.normal(local.mu[k], local.sigma))


def sample_local_model(
    global_model: GlobalModel, sigma_c: float, client: int, rng: np.random.Generator
) -> LocalModel:
    """Draw a client's local means, each ``N(mu_k, sigma_c^2)`` independently."""
    mu = global_model.mu + sigma_c * rng.standard_normal(global_model.n_arms)
    return LocalModel(client, mu, global_model.sigma)


def build_synthetic_global(
    n_arms: int, mu_lo: float, mu_hi: float, gap: float, sigma: float, seed: int
) -> GlobalModel:
    """Global means in ``[mu_lo, mu_hi]`` with minimum gap exactly ``gap``.

    Arm 0 is optimal at ``mu_hi`` and arm 1 is the runner-up at ``mu_hi - gap``;
    the other arms are uniform on ``[mu_lo, mu_hi - gap]``.
    """
    if not gap > 0:
        raise ConfigError(f"gap must be positive, got {gap}")
    if not mu_hi > mu_lo:
        raise ConfigError(f"need mu_hi > mu_lo, got [{mu_lo}, {mu_hi}]")
    if n_arms < 1:
        raise ConfigError("need at least one arm")
    rng = stream(seed, "global")
    top = mu_hi - gap
    rest = rng.uniform(min(mu_lo, top), top, size=max(n_arms - 2, 0))
    mu = np.concatenate(([mu_hi, top], rest))[:n_arms]
    return GlobalModel(mu, sigma)


class Environment:
    """Source of local models for the protocol."""

    kind = "abstract"
    global_model: GlobalModel

    @property
    def n_arms(self) -> int:
        return self.global_model.n_arms

    @property
    def max_clients(self) -> int | None:
        return None

    def local_model(self, client: int, seed: int, rep: int) -> LocalModel:
        raise NotImplementedError

    def locals_in_unit_interval(self) -> bool:
        raise NotImplementedError


@dataclass
class ApproximateEnv(Environment):
    global_model: GlobalModel
    sigma_c: float
    kind = "approximate"

    def __post_init__(self) -> None:
        if self.sigma_c < 0:
            raise ConfigError(f"sigma_c must be non-negative, got {self.sigma_c}")

    def local_model(self, client: int, seed: int, rep: int) -> LocalModel:
        return sample_local_model(self.global_model, self.sigma_c, client, stream(seed, rep, client, "local"))

    def locals_in_unit_interval(self) -> bool:
        # Gaussian locals are unbounded; only the degenerate case qualifies.
        return self.sigma_c == 0 and bool(np.all((self.global_model.mu >= 0) & (self.global_model.mu <= 1)))


@dataclass
class ExactEnv(Environment):
    """Fixed local models; the global means are their per-arm average."""

    locals_: list[LocalModel]
    global_model: GlobalModel = field(init=False)
    kind = "exact"

    def __post_init__(self) -> None:
        if not self.locals_:
            raise ConfigError("exact environment needs at least one local model")
        mat = np.vstack([lm.mu for lm in self.locals_])
        self.global_model = GlobalModel(mat.mean(axis=0), self.locals_[0].sigma)

    @property
    def max_clients(self) -> int:
        return len(self.locals_)

    @property
    def local_matrix(self) -> np.ndarray:
        return np.vstack([lm.mu for lm in self.locals_])

    def local_model(self, client: int, seed: int, rep: int) -> LocalModel:
        if client >= len(self.locals_):
            raise ConfigError(f"exact environment has only {len(self.locals_)} clients, asked for client {client}")
        return self.locals_[client]

    def locals_in_unit_interval(self) -> bool:
        m = self.local_matrix
        return bool(np.all((m >= 0) & (m <= 1)))


def build_exact_env(
    global_model: GlobalModel,
    n_clients: int,
    seed: int,
    spread: float = 0.02,
    boost: float = 0.15,
    hide_optimum: bool = True,
    max_tries: int = 1000,
) -> ExactEnv:
    """Heterogeneous local models averaging exactly to ``global_model``.

    Each client gets Gaussian deviations of scale ``spread`` plus a ``boost`` on
    one favoured sub-optimal arm; deviations are centred per arm across clients
    so the average is unchanged. With ``hide_optimum`` the globally optimal arm
    is not the best arm of any client; draws violating that (or leaving
    ``[0, 1]`` when the global means lie in it) are rejected and redrawn.
    """
    if n_clients < 1:
        raise ConfigError("need at least one client")
    mu = global_model.mu
    K = mu.size
    best = global_model.best_arm
    others = [k for k in range(K) if k != best]
    bounded = bool(np.all((mu >= 0) & (mu <= 1)))
    rng = stream(seed, "exact-locals")
    if n_clients == 1 or not others:
        hide_optimum = False
    for _ in range(max_tries):
        dev = spread * rng.standard_normal((n_clients, K))
        if hide_optimum:
            fav = rng.permutation(np.resize(rng.permutation(others), n_clients))
            dev[np.arange(n_clients), fav] += boost
        dev -= dev.mean(axis=0)
        mat = mu + dev
        if hide_optimum and np.any(np.argmax(mat, axis=1) == best):
            continue
        if bounded and not np.all((mat >= 0) & (mat <= 1)):
            continue
        env = ExactEnv([LocalModel(m, mat[m], global_model.sigma) for m in range(n_clients)])
        # Centring makes the average equal to mu up to rounding; keep the
        # requested global means so gaps stay exact.
        env.global_model = global_model
        return env
    raise ConfigError("could not construct local models satisfying the constraints; increase boost or spread")


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_ratings(path: str | Path, delimiter: str = "\t") -> np.ndarray:
    """Load ``(client_id, item_id, rating)`` rows; extra columns are ignored.

    A header row is detected by a non-numeric first field.
    """
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            for i, rec in enumerate(csv.reader(fh, delimiter=delimiter)):
                if not rec or not rec[0].strip():
                    continue
                if i == 0 and not _is_number(rec[0]):
                    continue
                if len(rec) < 3:
                    raise ConfigError(f"{path}: line {i + 1} has fewer than three columns")
                rows.append((float(rec[0]), float(rec[1]), float(rec[2])))
    except OSError as exc:
        raise ConfigError(f"cannot read ratings file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no ratings found")
    return np.array(rows, dtype=float)


def build_empirical_env(
    ratings_path: str | Path,
    n_groups: int,
    seed: int,
    sigma: float = 0.5,
    delimiter: str = "\t",
    scale: float | None = None,
) -> ExactEnv:
    """Exact environment from a ratings table.

    Items are shuffled with ``seed`` and split into ``n_groups`` equal-size
    groups (the arms). Client ``m``'s local mean for arm ``k`` is its mean rating
    over the items of group ``k``; a client without ratings in a group gets the
    mean of the other clients' local means for that group. Ratings are divided
    by ``scale`` when given. Clients are listed in a ``seed``-shuffled order, so
    a run over the first ``M`` clients uses a random subset.
    """
    data = read_ratings(ratings_path, delimiter)
    users, u_idx = np.unique(data[:, 0], return_inverse=True)
    items, i_idx = np.unique(data[:, 1], return_inverse=True)
    if items.size < n_groups:
        raise ConfigError(f"{items.size} items cannot be split into {n_groups} groups")
    ratings = data[:, 2] / scale if scale else data[:, 2]

    group_of_item = np.empty(items.size, dtype=np.int64)
    perm = stream(seed, "item-groups").permutation(items.size)
    for k, chunk in enumerate(np.array_split(perm, n_groups)):
        group_of_item[chunk] = k
    grp = group_of_item[i_idx]

    sums = np.zeros((users.size, n_groups))
    counts = np.zeros((users.size, n_groups))
    np.add.at(sums, (u_idx, grp), ratings)
    np.add.at(counts, (u_idx, grp), 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mat = sums / counts
    rated = counts > 0
    if not np.all(rated.any(axis=0)):
        raise ConfigError("some item group has no ratings at all")
    col_mean = np.nanmean(np.where(rated, mat, np.nan), axis=0)
    mat = np.where(rated, mat, col_mean)
    mat = mat[stream(seed, "client-order").permutation(users.size)]
    return ExactEnv([LocalModel(m, mat[m], sigma) for m in range(users.size)])
