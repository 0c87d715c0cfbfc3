"""Experiment harness: config, metrics, baseline, training orchestration."""

from .baseline import DqnAgent, run_baseline_dqn_update
from .config import (
    AgentKnobs,
    AtsKnobs,
    ExperimentConfig,
    KEY_REGISTRY,
    apply_overrides,
    build_config,
    load_config,
    parse_entries,
    resolve,
    resolved_mapping,
)
from .metrics import (
    CSV_HEADER,
    EvalRecord,
    MetricsRecord,
    RunResult,
    aggregate_metrics,
    final_window_mean,
    write_eval_csv,
    write_metrics_csv,
    write_summary,
)
from .run import (
    Team,
    agent_config_for,
    attention_config_for,
    build_team,
    evaluate,
    load_team,
    packets_for,
    run_episode,
    run_training,
    run_transfer,
    train_single_seed,
)

__all__ = [
    "DqnAgent", "run_baseline_dqn_update",
    "AgentKnobs", "AtsKnobs", "ExperimentConfig", "KEY_REGISTRY",
    "apply_overrides", "build_config", "load_config", "parse_entries",
    "resolve", "resolved_mapping",
    "CSV_HEADER", "EvalRecord", "MetricsRecord", "RunResult",
    "aggregate_metrics", "final_window_mean", "write_eval_csv",
    "write_metrics_csv", "write_summary",
    "Team", "agent_config_for", "attention_config_for", "build_team",
    "evaluate", "load_team", "packets_for", "run_episode", "run_training",
    "run_transfer", "train_single_seed",
]
