"""Experiment configuration files.

A configuration is a flat TOML table. Two kinds exist: ``experiment``
(episodes of one algorithm, optionally several ``[[variants]]`` that override
keys of the base table) and ``pz`` (a client-sampling failure sweep).
Presets are ordinary configuration files shipped in ``fmab/presets``.
"""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import tomli_w

from ..errors import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGORITHMS = ("fed1", "fed2", "baseline", "centralized")
ENV_KINDS = ("approximate", "exact", "empirical")


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    algorithm: str = "fed1"
    env: str = "exact"
    n_arms: int = 10
    mu_lo: float = 0.7
    mu_hi: float = 0.8
    gap: float = 0.02
    sigma: float = 0.5
    sigma_c: float = 0.0
    local_spread: float = 0.02
    local_boost: float = 0.15
    ratings_path: str | None = None
    ratings_delimiter: str = "\t"
    rating_scale: float | None = None
    f_kind: str = "ceil_log"
    kappa: float = 10.0
    g_kind: str = "none"
    lam: float = 1.0
    privacy: str = "plain"
    noise_scale: float = 0.0
    noise_rel: float = 0.0
    horizon: int = 200_000
    cost: float = 1.0
    n_clients: int | None = None
    max_clients: int | None = None
    replications: int = 100
    seed: int = 2021
    out: str = "runs/experiment"
    workers: int = 1
    checkpoints: int = 2000
    plot: bool = False
    kind: str = "experiment"
    variants: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.kind != "experiment":
            raise ConfigError(f"not an experiment config (kind = {self.kind!r})")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.env not in ENV_KINDS:
            raise ConfigError(f"env must be one of {ENV_KINDS}, got {self.env!r}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.horizon < 2:
            raise ConfigError("horizon must be >= 2")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.algorithm == "fed2" and self.g_kind == "none":
            raise ConfigError("fed2 needs an admission schedule: set g_kind")
        if self.algorithm in ("fed1", "centralized") and self.g_kind != "none":
            raise ConfigError(f"{self.algorithm} uses a fixed population: g_kind must be 'none'")
        if self.env == "empirical":
            if not self.ratings_path:
                raise ConfigError("empirical environment needs ratings_path")
            if not Path(self.ratings_path).is_file():
                raise ConfigError(f"ratings file not found: {self.ratings_path}")
        if self.env == "exact" and self.algorithm != "baseline" and not self.n_clients:
            if self.algorithm != "fed2" or not self.max_clients:
                raise ConfigError("synthetic exact environment needs n_clients (or max_clients for fed2)")
        for v in self.variants:
            unknown = set(v) - set(_FIELD_NAMES) - {"label"}
            if unknown:
                raise ConfigError(f"unknown keys in variant: {sorted(unknown)}")

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None or (f.name == "variants" and not value):
                continue
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentConfig":
        unknown = set(data) - set(_FIELD_NAMES)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**_coerce(cls, data))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def expand(self) -> list[tuple[str, "ExperimentConfig"]]:
        """``(label, config)`` for every variant, or the config itself."""
        if not self.variants:
            return [(self.name, self)]
        base = self.to_dict()
        base.pop("variants", None)
        out = []
        for i, v in enumerate(self.variants):
            v = dict(v)
            label = str(v.pop("label", f"variant{i}"))
            merged = {**base, **v, "name": f"{self.name}/{label}", "out": str(Path(self.out) / label)}
            out.append((label, ExperimentConfig.from_dict(merged)))
        return out


_FIELD_NAMES = tuple(f.name for f in fields(ExperimentConfig))


@dataclass
class PzSweepConfig:
    name: str = "pz"
    kind: str = "pz"
    n_arms: int = 10
    mu_lo: float = 0.7
    mu_hi: float = 0.8
    gaps: list[float] = field(default_factory=lambda: [0.02, 0.01])
    sigma_c: float = 0.1
    clients: list[int] = field(default_factory=lambda: list(range(5, 55, 5)))
    trials: int = 100_000
    seed: int = 2021
    out: str = "runs/pz"

    def __post_init__(self) -> None:
        if self.kind != "pz":
            raise ConfigError(f"not a pz-sweep config (kind = {self.kind!r})")
        if self.trials < 1 or not self.clients or min(self.clients) < 1:
            raise ConfigError("need trials >= 1 and client counts >= 1")
        if not self.gaps or min(self.gaps) <= 0:
            raise ConfigError("gaps must be positive")

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PzSweepConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            return cls(**_coerce(cls, data))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _coerce(cls, data: dict[str, Any]) -> dict[str, Any]:
    # TOML has distinct int/float types; accept 10 where a float is expected
    # and 1e4-style floats for integer fields when they are whole.
    hints = {f.name: str(f.type) for f in fields(cls)}
    out = dict(data)
    for key, value in data.items():
        hint = hints.get(key, "")
        if hint.startswith("float") and isinstance(value, int) and not isinstance(value, bool):
            out[key] = float(value)
        elif hint.startswith("int") and isinstance(value, float):
            if value != int(value):
                raise ConfigError(f"{key} must be an integer, got {value}")
            out[key] = int(value)
    return out


Config = ExperimentConfig | PzSweepConfig


def parse_config(data: dict[str, Any]) -> Config:
    if data.get("kind", "experiment") == "pz":
        return PzSweepConfig.from_dict(data)
    return ExperimentConfig.from_dict(data)


def read_toml(path: str | Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> Config:
    data = read_toml(path)
    data.update(overrides or {})
    return parse_config(data)


def dump_config(cfg: Config, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        tomli_w.dump(cfg.to_dict(), fh)


def dumps_config(cfg: Config) -> str:
    return tomli_w.dumps(cfg.to_dict())


def parse_override(item: str) -> tuple[str, Any]:
    """``key=value`` with ``value`` read as a TOML value, else as a string."""
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw
    return key, value


def list_presets() -> list[str]:
    root = resources.files("fmab") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str, overrides: dict[str, Any] | None = None) -> Config:
    path = resources.files("fmab") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    data = tomllib.loads(path.read_text(encoding="utf-8"))
    data.update(overrides or {})
    return parse_config(data)
