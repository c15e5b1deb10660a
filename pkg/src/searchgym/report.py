"""Episode reporting: a delimited per-episode summary plus rendered figures."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .orchestrator import EpisodeRecord
from .trace import MACRO_TOOL_CALL, classify_macro_action


def episode_rows(records: list[EpisodeRecord]) -> list[dict]:
    rows = []
    for record in records:
        macro = classify_macro_action(record.trace)
        reward = record.reward
        rows.append(
            {
                "sample_id": record.sample_id,
                "terminal": record.terminal,
                "macro_action": macro,
                "turns": len(record.trace.turns),
                "tool_calls": len(record.tool_calls),
                "outcome": reward.outcome if reward else "",
                "behavior": reward.behavior if reward else "",
                "format": reward.format if reward else "",
                "tool_used": reward.tool_used if reward else "",
                "composite": reward.composite if reward else "",
                "config": reward.config_kind if reward else "",
            }
        )
    return rows


def write_report(records: list[EpisodeRecord], out_dir: str | Path) -> dict[str, str]:
    """Write report.csv plus summary figures; returns the output paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = episode_rows(records)

    csv_path = out_dir / "report.csv"
    fieldnames = [
        "sample_id",
        "terminal",
        "macro_action",
        "turns",
        "tool_calls",
        "outcome",
        "behavior",
        "format",
        "tool_used",
        "composite",
        "config",
    ]
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)

    paths = {"csv": str(csv_path)}
    scored = [r for r in records if r.reward is not None]
    if scored:
        paths["components"] = str(_components_figure(scored, out_dir))
        paths["composites"] = str(_composite_figure(scored, out_dir))
    return paths


def _components_figure(records: list[EpisodeRecord], out_dir: Path) -> Path:
    n = len(records)
    means = {
        "outcome": sum(r.reward.outcome for r in records) / n,
        "behavior": sum(r.reward.behavior for r in records) / n,
        "format": sum(r.reward.format for r in records) / n,
        "tool call ratio": sum(
            classify_macro_action(r.trace) == MACRO_TOOL_CALL for r in records
        )
        / n,
    }
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(list(means), list(means.values()), color="#4878a8")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("mean over episodes")
    ax.set_title(f"Reward components (n={n})")
    for i, value in enumerate(means.values()):
        ax.text(i, value + 0.02, f"{value:.2f}", ha="center", fontsize=9)
    fig.tight_layout()
    path = out_dir / "reward_components.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _composite_figure(records: list[EpisodeRecord], out_dir: Path) -> Path:
    composites = [r.reward.composite for r in records]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(composites, bins=20, range=(0.0, 1.0), color="#80a860", edgecolor="black")
    ax.set_xlabel("composite reward")
    ax.set_ylabel("episodes")
    ax.set_title("Composite reward distribution")
    fig.tight_layout()
    path = out_dir / "composite_hist.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
