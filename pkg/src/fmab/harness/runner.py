"""Replicated experiments: episodes, per-replication traces and summaries.

Every replication ``r`` draws from streams keyed by ``(seed, r, ...)``, so the
files written are the same whatever the worker count. Output layout of one run
directory::

    config.toml          resolved configuration
    traces/rep_0000.csv  checkpointed regret trace per replication
    phases/rep_0000.csv  phase log per replication (federated modes)
    outcomes.csv         one row per replication
    summary.csv          across-replication mean and standard error per checkpoint
    stats.json           commit / correctness rates, phase distribution, totals
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from ..baseline import baseline_run
from ..environments import ApproximateEnv, Environment, build_empirical_env, build_exact_env, build_synthetic_global
from ..errors import ConfigError
from ..protocol import PHASE_COLUMNS, PrivacyMode, phase_row, run_episode
from ..regret import TRACE_COLUMNS, recount_comm, recount_explore
from ..schedules import FKind, GKind, Schedule
from ..verification import estimate_pz_sweep
from .config import ExperimentConfig, PzSweepConfig, dump_config

log = logging.getLogger(__name__)

OUTCOME_COLUMNS = (
    "rep", "committed", "best_arm", "final_arm", "correct", "commit_slot", "phases",
    "n_clients", "regret_explore", "regret_comm", "regret_total", "post_commit_regret", "best_survived",
)
SUMMARY_COLUMNS = (
    "t", "n_reps", "M_t_mean", "explore_mean", "explore_se", "comm_mean", "comm_se", "total_mean", "total_se",
)
PZ_COLUMNS = ("M", "estimate", "std_error", "n_trials")


@dataclass
class RepRecord:
    """What one replication contributes to the run files."""

    rep: int
    outcome: dict
    trace: list[tuple]
    phases: list[tuple] | None
    recount_ok: bool


@dataclass
class RunSummary:
    out_dir: Path
    stats: dict
    outcomes: list[dict] = field(repr=False)
    summary: np.ndarray = field(repr=False)


def _env_key(cfg: ExperimentConfig) -> tuple:
    return (cfg.env, cfg.n_arms, cfg.mu_lo, cfg.mu_hi, cfg.gap, cfg.sigma, cfg.sigma_c, cfg.local_spread,
            cfg.local_boost, cfg.ratings_path, cfg.ratings_delimiter, cfg.rating_scale, cfg.seed,
            cfg.n_clients, cfg.max_clients)


@lru_cache(maxsize=8)
def _cached_env(key: tuple) -> Environment:
    (kind, n_arms, mu_lo, mu_hi, gap, sigma, sigma_c, spread, boost, ratings_path, delim, scale, seed,
     n_clients, max_clients) = key
    if kind == "empirical":
        return build_empirical_env(ratings_path, n_arms, seed, sigma=sigma, delimiter=delim, scale=scale)
    g = build_synthetic_global(n_arms, mu_lo, mu_hi, gap, sigma, seed)
    if kind == "approximate":
        return ApproximateEnv(g, sigma_c)
    return build_exact_env(g, n_clients or max_clients, seed, spread=spread, boost=boost)


def build_environment(cfg: ExperimentConfig) -> Environment:
    """The environment shared by every replication of ``cfg``."""
    if cfg.algorithm == "baseline" and cfg.env == "exact":
        # the baseline only needs the global model; skip building locals
        return ApproximateEnv(build_synthetic_global(cfg.n_arms, cfg.mu_lo, cfg.mu_hi, cfg.gap, cfg.sigma, cfg.seed), 0.0)
    return _cached_env(_env_key(cfg))


def build_schedule(cfg: ExperimentConfig) -> Schedule:
    try:
        return Schedule(FKind(cfg.f_kind), float(cfg.horizon), cfg.kappa, GKind(cfg.g_kind), cfg.lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_privacy(cfg: ExperimentConfig) -> PrivacyMode:
    try:
        return PrivacyMode(cfg.privacy, cfg.noise_scale, cfg.noise_rel)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def run_replication(cfg: ExperimentConfig, rep: int) -> RepRecord:
    env = build_environment(cfg)
    run_id = f"{cfg.name}#{rep}"
    if cfg.algorithm == "baseline":
        res = baseline_run(env.global_model, cfg.horizon, seed=cfg.seed, rep=rep)
        phases, n_phases, n_clients, phase_rows = res.rounds, res.rounds, 1, None
        survived = True
    else:
        sigma_c = cfg.sigma_c if cfg.env == "approximate" else None
        res = run_episode(
            cfg.algorithm, env, build_schedule(cfg), cost=cfg.cost, seed=cfg.seed, rep=rep,
            privacy=build_privacy(cfg), n_clients=cfg.n_clients, max_clients=cfg.max_clients, sigma_c=sigma_c,
        )
        n_phases, n_clients = res.phases, res.n_clients
        phase_rows = [phase_row(r) for r in res.phase_log]
        best = res.best_arm
        survived = all(best not in r.eliminated for r in res.phase_log)
    led = res.ledger
    post = 0.0
    if res.commit_slot is not None:
        post = float(led.explore[res.commit_slot:].sum() + led.comm[res.commit_slot:].sum())
        if cfg.algorithm == "centralized":
            post = float(led.explore[res.commit_slot:].sum())
    ok = math.isclose(recount_explore(led.gaps, res.pull_counts), led.explore_total, rel_tol=1e-12, abs_tol=1e-9)
    ok = ok and math.isclose(recount_comm(led.cost, led.comm_spans), led.comm_total, rel_tol=1e-12, abs_tol=1e-9)
    outcome = {
        "rep": rep,
        "committed": int(res.committed),
        "best_arm": res.best_arm,
        "final_arm": res.final_arm,
        "correct": int(res.correct),
        "commit_slot": -1 if res.commit_slot is None else res.commit_slot,
        "phases": n_phases,
        "n_clients": n_clients,
        "regret_explore": led.explore_total,
        "regret_comm": led.comm_total,
        "regret_total": led.total,
        "post_commit_regret": post,
        "best_survived": int(survived),
    }
    return RepRecord(rep, outcome, led.trace_rows(run_id, cfg.checkpoints), phase_rows, ok)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return " ".join(str(v) for v in x)
    return str(x)


def _std_error(values: np.ndarray, axis: int = 0) -> np.ndarray:
    n = values.shape[axis]
    if n < 2:
        return np.zeros(np.delete(values.shape, axis))
    return values.std(axis=axis, ddof=1) / math.sqrt(n)


def summarize_traces(traces: list[list[tuple]]) -> np.ndarray:
    """Mean and standard error at each checkpoint; rows follow ``SUMMARY_COLUMNS``."""
    arr = np.array([[row[1:6] for row in tr] for tr in traces], dtype=float)  # rep x checkpoint x 5
    t = arr[0, :, 0]
    n = np.full_like(t, arr.shape[0])
    m_t = arr[:, :, 1].mean(axis=0)
    cols = [t, n, m_t]
    for j in (2, 3, 4):
        cols += [arr[:, :, j].mean(axis=0), _std_error(arr[:, :, j])]
    return np.column_stack(cols)


def _stats(cfg: ExperimentConfig, outcomes: list[dict]) -> dict:
    n = len(outcomes)
    col = {k: np.array([o[k] for o in outcomes], dtype=float) for k in OUTCOME_COLUMNS}
    committed = col["committed"] == 1
    hist: dict[str, int] = {}
    for o in outcomes:
        if o["committed"]:
            hist[str(o["phases"])] = hist.get(str(o["phases"]), 0) + 1
    commit_slots = col["commit_slot"][committed]

    def mean_se(x: np.ndarray) -> dict:
        return {"mean": float(x.mean()), "se": float(_std_error(x[:, None])[0])} if x.size else {"mean": None, "se": None}

    return {
        "name": cfg.name,
        "algorithm": cfg.algorithm,
        "horizon": cfg.horizon,
        "replications": n,
        "commit_rate": float(committed.mean()),
        "correct_rate": float(col["correct"].mean()),
        "commit_correct_rate": float((committed & (col["correct"] == 1)).mean()),
        "best_survival_rate": float(col["best_survived"].mean()),
        "phases_mean": float(col["phases"].mean()),
        "phases_to_commit": dict(sorted(hist.items(), key=lambda kv: int(kv[0]))),
        "commit_slot": mean_se(commit_slots),
        "regret_explore": mean_se(col["regret_explore"]),
        "regret_comm": mean_se(col["regret_comm"]),
        "regret_total": mean_se(col["regret_total"]),
    }


def _pool_map(fn, cfg: ExperimentConfig, reps: list[int]) -> list[RepRecord]:
    if cfg.workers <= 1 or len(reps) <= 1:
        return [fn(cfg, r) for r in reps]
    with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
        return list(ex.map(fn, [cfg] * len(reps), reps))


def run_single(cfg: ExperimentConfig, write: bool = True) -> RunSummary:
    """Run ``cfg.replications`` episodes of a variant-free configuration."""
    if cfg.variants:
        raise ConfigError("use run_experiment for configurations with variants")
    build_environment(cfg)  # fail fast on environment errors before spawning workers
    out = Path(cfg.out)
    records = _pool_map(run_replication, cfg, list(range(cfg.replications)))
    if not all(r.recount_ok for r in records):
        raise RuntimeError("ledger totals disagree with the pull/communication recount")
    outcomes = [r.outcome for r in records]
    summary = summarize_traces([r.trace for r in records])
    stats = _stats(cfg, outcomes)
    if write:
        try:
            (out / "traces").mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
        dump_config(cfg, out / "config.toml")
        for r in records:
            _write_csv(out / "traces" / f"rep_{r.rep:04d}.csv", TRACE_COLUMNS, [[_fmt(v) for v in row] for row in r.trace])
            if r.phases is not None:
                (out / "phases").mkdir(exist_ok=True)
                _write_csv(out / "phases" / f"rep_{r.rep:04d}.csv", PHASE_COLUMNS, [[_fmt(v) for v in row] for row in r.phases])
        _write_csv(out / "outcomes.csv", OUTCOME_COLUMNS, [[_fmt(o[k]) for k in OUTCOME_COLUMNS] for o in outcomes])
        _write_csv(
            out / "summary.csv", SUMMARY_COLUMNS,
            [[str(int(row[0])), str(int(row[1]))] + [repr(float(v)) for v in row[2:]] for row in summary],
        )
        with open(out / "stats.json", "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if cfg.plot:
            from .plots import plot_summary

            plot_summary(summary, out / "regret.svg", title=cfg.name)
    log.info("%s: commit %.2f, correct %.2f, final regret %.1f", cfg.name, stats["commit_rate"],
             stats["correct_rate"], stats["regret_total"]["mean"])
    return RunSummary(out, stats, outcomes, summary)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> list[RunSummary]:
    """Run every variant of ``cfg``; variants land in sub-directories of ``cfg.out``."""
    return [run_single(sub, write=write) for _, sub in cfg.expand()]


def run_pz_sweep(cfg: PzSweepConfig, write: bool = True) -> dict[float, list]:
    """Failure-probability sweep over ``cfg.clients`` for every gap; one CSV per gap."""
    out = Path(cfg.out)
    results = {}
    for gap in cfg.gaps:
        g = build_synthetic_global(cfg.n_arms, cfg.mu_lo, cfg.mu_hi, gap, 0.0, cfg.seed)
        results[gap] = estimate_pz_sweep(g, cfg.sigma_c, cfg.clients, cfg.trials, cfg.seed)
    if write:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
        dump_config(cfg, out / "config.toml")
        for gap, rows in results.items():
            _write_csv(out / f"pz_gap_{gap:g}.csv", PZ_COLUMNS,
                       [[str(r.M), repr(r.estimate), repr(r.std_error), str(r.n_trials)] for r in rows])
    return results
