"""Optional SVG line plots of a run summary (needs matplotlib)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError


def plot_summary(summary: np.ndarray, path: str | Path, title: str = "") -> None:
    """Mean total / exploration / communication regret with one-SE bands."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ConfigError("plotting needs matplotlib (pip install 'artifact[plot]')") from exc
    t = summary[:, 0]
    fig, ax = plt.subplots(figsize=(6, 4))
    for j, label in ((7, "total"), (3, "exploration"), (5, "communication")):
        mean, se = summary[:, j], summary[:, j + 1]
        ax.plot(t, mean, label=label)
        ax.fill_between(t, mean - se, mean + se, alpha=0.2)
    ax.set_xlabel("t")
    ax.set_ylabel("regret")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    # no date stamp, so reruns write identical files
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
