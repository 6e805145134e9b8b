"""Side-by-side comparison of finished runs.

Each argument is a run directory (or its ``summary.csv``). Checkpoints are
aligned on the slots common to every run; deltas and ratios are taken against
the first run.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError

COMPARE_COLUMNS = (
    "run", "final_regret", "final_regret_se", "t_at", "regret_at_t", "commit_rate", "correct_rate",
    "mean_phases", "delta_final", "ratio_final", "delta_at_t",
)


@dataclass
class LoadedRun:
    name: str
    summary: np.ndarray
    stats: dict


def load_run(path: str | Path) -> LoadedRun:
    p = Path(path)
    run_dir = p.parent if p.name == "summary.csv" else p
    summary_path = run_dir / "summary.csv"
    stats_path = run_dir / "stats.json"
    for f in (summary_path, stats_path):
        if not f.is_file():
            raise ConfigError(f"missing run file: {f}")
    with open(summary_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    try:
        summary = np.array(rows[1:], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{summary_path}: {exc}") from exc
    if summary.ndim != 2 or summary.shape[0] == 0:
        raise ConfigError(f"{summary_path}: no checkpoint rows")
    with open(stats_path, encoding="utf-8") as fh:
        stats = json.load(fh)
    return LoadedRun(stats.get("name", str(run_dir)), summary, stats)


def _value_at(summary: np.ndarray, t: int) -> float:
    i = int(np.searchsorted(summary[:, 0], t))
    return float(summary[i, 7])


def compare_runs(paths: list[str | Path], at: int | None = None) -> list[dict]:
    """One row per run: final and fixed-``t`` regret, rates, deltas vs the first run.

    ``at`` defaults to the middle common checkpoint; otherwise the largest
    common checkpoint not above ``at`` is used.
    """
    if not paths:
        raise ConfigError("nothing to compare")
    runs = [load_run(p) for p in paths]
    common = runs[0].summary[:, 0]
    for r in runs[1:]:
        common = np.intersect1d(common, r.summary[:, 0])
    if common.size == 0:
        raise ConfigError("runs share no checkpoints")
    if at is None:
        t_at = int(common[(common.size - 1) // 2])
    else:
        below = common[common <= at]
        t_at = int(below[-1]) if below.size else int(common[0])
    ref_final = float(runs[0].summary[-1, 7])
    ref_at = _value_at(runs[0].summary, t_at)
    table = []
    for r in runs:
        final = float(r.summary[-1, 7])
        at_t = _value_at(r.summary, t_at)
        table.append({
            "run": r.name,
            "final_regret": final,
            "final_regret_se": float(r.summary[-1, 8]),
            "t_at": t_at,
            "regret_at_t": at_t,
            "commit_rate": r.stats.get("commit_rate"),
            "correct_rate": r.stats.get("correct_rate"),
            "mean_phases": r.stats.get("phases_mean"),
            "delta_final": final - ref_final,
            "ratio_final": final / ref_final if ref_final else float("nan"),
            "delta_at_t": at_t - ref_at,
        })
    return table


def write_comparison(table: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=COMPARE_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(table)


def format_comparison(table: list[dict]) -> str:
    head = ("run", "final", "se", "t", "at t", "commit", "correct", "phases", "ratio")
    lines = ["  ".join(f"{h:>12}" for h in head)]
    for row in table:
        vals = (row["run"][-12:], f"{row['final_regret']:.1f}", f"{row['final_regret_se']:.1f}", str(row["t_at"]),
                f"{row['regret_at_t']:.1f}", f"{row['commit_rate']:.2f}", f"{row['correct_rate']:.2f}",
                f"{row['mean_phases']:.1f}", f"{row['ratio_final']:.3f}")
        lines.append("  ".join(f"{v:>12}" for v in vals))
    return "\n".join(lines)
