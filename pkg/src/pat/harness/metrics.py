"""Per-episode metric records, CSV logs, and multi-seed aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import UsageError

CSV_HEADER = "episode,avg_step,success,team_reward,student_mode_freq"
METRIC_NAMES = ("avg_step", "success_rate", "team_reward", "student_mode_freq")


@dataclass(frozen=True)
class MetricsRecord:
    """One training episode."""

    episode: int
    avg_step: int
    success: bool
    team_reward: float
    mode_freq: tuple[float, ...]  # per-agent student-mode frequency

    @property
    def mean_mode_freq(self) -> float:
        return float(np.mean(self.mode_freq)) if self.mode_freq else 0.0

    def csv_line(self) -> str:
        return (f"{self.episode},{self.avg_step},{int(self.success)},"
                f"{self.team_reward:.10g},{self.mean_mode_freq:.10g}")


@dataclass(frozen=True)
class EvalRecord:
    """Aggregate of one greedy evaluation checkpoint (several episodes)."""

    episode: int           # training episode the checkpoint follows
    avg_step: float
    success_rate: float
    team_reward: float
    student_mode_freq: float

    def csv_line(self) -> str:
        return (f"{self.episode},{self.avg_step:.10g},{self.success_rate:.10g},"
                f"{self.team_reward:.10g},{self.student_mode_freq:.10g}")

    def metric(self, name: str) -> float:
        return float(getattr(self, name if name != "success" else "success_rate"))


EVAL_CSV_HEADER = "episode,avg_step,success_rate,team_reward,student_mode_freq"


def write_metrics_csv(path, records: list[MetricsRecord]) -> None:
    lines = [CSV_HEADER] + [r.csv_line() for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def write_eval_csv(path, records: list[EvalRecord]) -> None:
    lines = [EVAL_CSV_HEADER] + [r.csv_line() for r in records]
    Path(path).write_text("\n".join(lines) + "\n")


def final_window_mean(evals: list[EvalRecord], total_episodes: int,
                      window_frac: float = 0.1) -> dict[str, float]:
    """Mean of each metric over the evaluation checkpoints that fall inside the
    final `window_frac` of the episode axis (at least the last checkpoint)."""
    if not evals:
        raise UsageError("no evaluation records to aggregate")
    cutoff = total_episodes - max(1, int(round(window_frac * total_episodes)))
    window = [e for e in evals if e.episode >= cutoff] or [evals[-1]]
    return {name: float(np.mean([e.metric(name) for e in window])) for name in METRIC_NAMES}


@dataclass
class RunResult:
    """Multi-seed outcome: per-seed final-window means plus mean +- sample std."""

    per_seed: dict[int, dict[str, float]]
    aggregates: dict[str, dict[str, float]]
    diverged_seeds: tuple[int, ...] = ()

    @property
    def n_seeds(self) -> int:
        return len(self.per_seed)


def aggregate_metrics(per_seed: dict[int, dict[str, float]],
                      diverged_seeds: tuple[int, ...] = ()) -> RunResult:
    """Mean and sample standard deviation of each metric across seeds."""
    if not per_seed:
        raise UsageError("aggregate_metrics needs at least one seed series")
    aggregates = {}
    for name in METRIC_NAMES:
        values = np.array([per_seed[s][name] for s in sorted(per_seed)])
        std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
        aggregates[name] = {"mean": float(values.mean()), "std": std, "n_seeds": int(values.size)}
    return RunResult(per_seed=dict(per_seed), aggregates=aggregates,
                     diverged_seeds=tuple(diverged_seeds))


def write_summary(path, result: RunResult, algorithm: str, resolved_config: dict) -> None:
    payload = {
        "algorithm": algorithm,
        "metrics": result.aggregates,
        "per_seed": {str(seed): vals for seed, vals in sorted(result.per_seed.items())},
        "diverged_seeds": list(result.diverged_seeds),
        "config": resolved_config,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
