"""Training orchestration: per-seed episode loop, evaluation, transfer runs,
and multi-seed aggregation.

Every random draw descends from the run seed through tagged SeedSequence
streams (env episodes, per-agent exploration, shared-attention updates, mode
forcing, evaluation), so a (config, seed) pair fully determines every logged
byte. Seeds are independent and may run in parallel worker processes.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..agent import AgentConfig, PatAgent
from ..ats import (
    AtsItem,
    AttentionConfig,
    SharedAttention,
    TeacherPacket,
    advise,
    import_shared,
    update_ats,
)
from ..envs import EnvSpec, observation_length, reset, step
from ..errors import AdviceUnavailableError, ConfigError, NumericError, PatError
from ..nncore import MlpSpec, load_params, save_params
from .baseline import DqnAgent
from .config import ExperimentConfig, resolved_mapping
from .metrics import (
    EvalRecord,
    MetricsRecord,
    RunResult,
    aggregate_metrics,
    final_window_mean,
    write_eval_csv,
    write_metrics_csv,
    write_summary,
)

# SeedSequence stream tags
_ENV, _AGENT, _ATS, _EVAL, _MODE, _LAYOUT = range(6)


def _derive_int(*entropy) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def _derive_rng(*entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def agent_config_for(config: ExperimentConfig) -> AgentConfig:
    knobs = config.agent
    return AgentConfig(
        obs_dim=observation_length(config.env),
        n_actions=5,
        d_hidden=knobs.d_hidden,
        bptt_window=knobs.bptt_window,
        net_widths=knobs.net_widths,
        mode_threshold=knobs.mode_threshold,
        buffer_capacity=knobs.buffer_capacity,
        batch_size=knobs.batch_size,
        gamma=config.env.gamma,
        tau_soft=knobs.tau_soft,
        lr_actor=knobs.lr_actor,
        lr_critic=knobs.lr_critic,
        gumbel_temp=knobs.gumbel_temp,
        gumbel_temp_final=knobs.gumbel_temp_final,
        mode_noise=knobs.mode_noise,
        explore_eps=knobs.explore_eps,
        explore_eps_final=knobs.explore_eps_final,
    )


def attention_config_for(config: ExperimentConfig) -> AttentionConfig:
    knobs = config.agent
    actor_spec = MlpSpec((knobs.d_hidden, *knobs.net_widths, 5))
    d_value = config.ats.d_value or actor_spec.param_count()  # 0 = full width
    return AttentionConfig(
        d_model=knobs.d_hidden,
        d_history=2 * knobs.d_hidden,
        d_query=config.ats.d_query,
        d_value=d_value,
        n_heads=config.ats.heads,
        dropout=config.ats.dropout,
        actor_spec=actor_spec,
        identity_value_init=config.ats.identity_init,
    )


@dataclass
class Team:
    """Everything one training run owns: agents plus the shared selector."""

    config: ExperimentConfig
    agents: list
    shared: SharedAttention | None
    ats_buffer: object | None
    ats_rng: np.random.Generator | None
    mode_rng: np.random.Generator

    @property
    def is_pat(self) -> bool:
        return self.shared is not None


def build_team(config: ExperimentConfig, seed: int) -> Team:
    from ..agent.replay import RingBuffer

    agent_cfg = agent_config_for(config)
    if config.algorithm == "PAT":
        agents = [PatAgent(agent_cfg, _derive_rng(seed, _AGENT, i))
                  for i in range(config.env.n_agents)]
        att_cfg = attention_config_for(config)
        if config.ats.pretrained:
            shared = import_shared(config.ats.pretrained, att_cfg, lr=config.ats.lr)
        else:
            shared = SharedAttention(att_cfg, _derive_rng(seed, _ATS, 0), lr=config.ats.lr)
        ats_buffer = RingBuffer(config.ats.buffer_capacity)
        ats_rng = _derive_rng(seed, _ATS, 1)
    else:
        agents = [DqnAgent(agent_cfg, _derive_rng(seed, _AGENT, i))
                  for i in range(config.env.n_agents)]
        shared, ats_buffer, ats_rng = None, None, None
    return Team(config=config, agents=agents, shared=shared,
                ats_buffer=ats_buffer, ats_rng=ats_rng,
                mode_rng=_derive_rng(seed, _MODE, 0))


def _set_schedules(team: Team, episode: int, total: int) -> None:
    frac = episode / max(1, total - 1)
    knobs = team.config.agent
    for agent in team.agents:
        if team.is_pat:
            agent.gumbel_temp = knobs.gumbel_temp + (knobs.gumbel_temp_final - knobs.gumbel_temp) * frac
            agent.mode_noise = knobs.mode_noise * (1.0 - frac)
            agent.explore_eps = knobs.explore_eps + (knobs.explore_eps_final - knobs.explore_eps) * frac
        else:
            agent.epsilon = knobs.epsilon_start + (knobs.epsilon_final - knobs.epsilon_start) * frac


def packets_for(team: Team, student: int) -> list[TeacherPacket]:
    """Fresh snapshots from every teammate; the student itself is excluded."""
    return [
        TeacherPacket(teacher_id=j, history=agent.history_state(), theta=agent.flat_actor())
        for j, agent in enumerate(team.agents) if j != student
    ]


@dataclass
class EpisodeStats:
    steps: int
    success: bool
    team_reward: float
    mode_freq: tuple[float, ...]
    mode_log: list = field(default_factory=list)     # per step: executed modes
    reward_log: list = field(default_factory=list)   # per step: per-agent rewards


def run_episode(config: ExperimentConfig, team: Team, env_seed: int,
                layout_seed: int | None, training: bool, episode_index: int,
                collect_modes: bool = False) -> EpisodeStats:
    env = config.env
    M = env.n_agents
    agents = team.agents
    state, obs = reset(env, env_seed, layout_seed)
    for agent in agents:
        agent.begin_episode()

    in_warmup = training and team.is_pat and episode_index < config.warmup_episodes
    warm_p = 0.5 * (1.0 - episode_index / max(1, config.warmup_episodes)) if in_warmup else 0.0

    prev_action: list[int | None] = [None] * M
    pending: list[dict | None] = [None] * M
    student_steps = np.zeros(M)
    steps = 0
    team_reward = 0.0
    mode_log: list[tuple[bool, ...]] = []
    reward_log: list[tuple[float, ...]] = []
    outcome = None

    while not state.done:
        ms = [agents[i].encode_observation(obs[i], prev_action[i]) for i in range(M)]
        for i in range(M):
            if pending[i] is not None:
                _finalize(agents[i], pending[i], ms[i], done=False, training=training)
                pending[i] = None

        actions: list[int] = []
        executed_student: list[bool] = []
        for i in range(M):
            agent = agents[i]
            student_info = None
            if team.is_pat:
                if in_warmup:
                    w = agent.decide_mode(ms[i], training=False)[1]
                    mode = bool(team.mode_rng.random() < warm_p)
                else:
                    mode, w = agent.decide_mode(ms[i], training)
                action = None
                if mode:
                    try:
                        packets = packets_for(team, i)
                        result = advise(team.shared, ms[i], packets,
                                        training=training, rng=agent.rng,
                                        temperature=agent.gumbel_temp)
                        action = result.action
                        greedy_self = agent.act_self(ms[i], explore=False)
                        r_student = agent.student_reward(ms[i], action, greedy_self)
                        student_info = (w, r_student)
                        if training:
                            team.ats_buffer.append(AtsItem(
                                m=ms[i], packets=tuple(packets),
                                executed_action=action,
                                critic_spec=agent.critic_spec, critic=agent.critic))
                        student_steps[i] += 1
                    except AdviceUnavailableError:
                        action = None
                if action is None:
                    action = agent.act_self(ms[i], explore=training)
            else:
                action = agent.act(ms[i], explore=training)
            actions.append(action)
            executed_student.append(student_info is not None)
            pending[i] = {"m": ms[i], "window": agents[i].current_window(),
                          "action": action, "student": student_info, "reward": 0.0}

        outcome = step(env, state, actions)
        steps += 1
        team_reward += float(outcome.rewards.sum())
        for i in range(M):
            pending[i]["reward"] = float(outcome.rewards[i])
        if collect_modes:
            mode_log.append(tuple(executed_student))
            reward_log.append(tuple(float(r) for r in outcome.rewards))
        obs = outcome.obs
        prev_action = list(actions)

        if training and steps % config.update_every == 0:
            _run_updates(config, team, in_warmup, steps // config.update_every)

    if training:
        for i in range(M):
            if pending[i] is not None:
                m_final = agents[i].encode_observation(obs[i], prev_action[i])
                _finalize(agents[i], pending[i], m_final, done=True, training=True)

    freq = tuple(float(s) / steps for s in student_steps) if steps else tuple(0.0 for _ in range(M))
    return EpisodeStats(steps=steps, success=bool(outcome.success if outcome else False),
                        team_reward=team_reward, mode_freq=freq,
                        mode_log=mode_log, reward_log=reward_log)


def _finalize(agent, entry: dict, m_next: np.ndarray, done: bool, training: bool) -> None:
    if not training:
        return
    agent.store_transition(entry["m"], entry["window"], entry["action"],
                           entry["reward"], m_next, done)
    if entry["student"] is not None:
        w, r_student = entry["student"]
        agent.store_student_transition(entry["m"], w, r_student, m_next)


def _run_updates(config: ExperimentConfig, team: Team, in_warmup: bool,
                 update_round: int) -> None:
    for agent in team.agents:
        if team.is_pat:
            if len(agent.replay) >= agent.cfg.batch_size:
                agent.update_self()
            if not in_warmup and len(agent.student_replay) >= agent.cfg.batch_size:
                agent.update_student()
        else:
            if len(agent.replay) >= agent.cfg.batch_size:
                agent.update()
        agent.soft_update_targets()
    if (team.is_pat and not config.ats.freeze
            and update_round % config.ats.update_every == 0
            and len(team.ats_buffer) >= config.ats.batch_size):
        batch = team.ats_buffer.sample(team.ats_rng, config.ats.batch_size)
        update_ats(team.shared, batch, temperature=team.agents[0].gumbel_temp,
                   rng=team.ats_rng)


def evaluate(config: ExperimentConfig, team: Team, episodes: int, seed: int,
             at_episode: int = -1, policy: str = "greedy") -> EvalRecord:
    """Greedy evaluation: exploration, dropout, and mode noise disabled.
    `policy="random"` replaces every action with a uniform draw (diagnostics)."""
    if policy not in ("greedy", "random"):
        raise ConfigError(f"unknown evaluation policy {policy!r}")
    layout = _derive_int(seed, _LAYOUT) if config.fixed_layout else None
    stats = []
    for j in range(episodes):
        env_seed = _derive_int(seed, _EVAL, at_episode + 1, j)
        if policy == "random":
            stats.append(_random_episode(config.env, env_seed, layout))
        else:
            stats.append(run_episode(config, team, env_seed, layout,
                                     training=False, episode_index=at_episode))
    return EvalRecord(
        episode=at_episode,
        avg_step=float(np.mean([s.steps for s in stats])),
        success_rate=float(np.mean([float(s.success) for s in stats])),
        team_reward=float(np.mean([s.team_reward for s in stats])),
        student_mode_freq=float(np.mean([np.mean(s.mode_freq) for s in stats])),
    )


def _random_episode(env: EnvSpec, env_seed: int, layout_seed: int | None) -> EpisodeStats:
    rng = _derive_rng(env_seed, 0xA11)
    state, _ = reset(env, env_seed, layout_seed)
    steps, total = 0, 0.0
    outcome = None
    while not state.done:
        outcome = step(env, state, rng.integers(0, 5, size=env.n_agents))
        steps += 1
        total += float(outcome.rewards.sum())
    return EpisodeStats(steps=steps, success=bool(outcome.success), team_reward=total,
                        mode_freq=tuple(0.0 for _ in range(env.n_agents)))


@dataclass
class SeedOutcome:
    seed: int
    records: list[MetricsRecord]
    evals: list[EvalRecord]
    diverged: bool = False
    error: str = ""

    def final_means(self, episodes: int) -> dict[str, float]:
        return final_window_mean(self.evals, episodes)


def train_single_seed(config: ExperimentConfig, seed: int,
                      out_dir: Path | None = None) -> SeedOutcome:
    team = build_team(config, seed)
    layout = _derive_int(seed, _LAYOUT) if config.fixed_layout else None
    records: list[MetricsRecord] = []
    evals: list[EvalRecord] = []
    try:
        for episode in range(config.episodes):
            _set_schedules(team, episode, config.episodes)
            env_seed = _derive_int(seed, _ENV, episode)
            stats = run_episode(config, team, env_seed, layout,
                                training=True, episode_index=episode)
            records.append(MetricsRecord(
                episode=episode, avg_step=stats.steps, success=stats.success,
                team_reward=stats.team_reward, mode_freq=stats.mode_freq))
            last = episode == config.episodes - 1
            if (episode + 1) % config.eval_every == 0 or last:
                evals.append(evaluate(config, team, config.eval_episodes, seed,
                                      at_episode=episode))
        outcome = SeedOutcome(seed=seed, records=records, evals=evals)
    except NumericError as exc:
        outcome = SeedOutcome(seed=seed, records=records, evals=evals,
                              diverged=True, error=str(exc))
    if out_dir is not None:
        _write_seed_outputs(config, team, outcome, Path(out_dir))
    return outcome


def _write_seed_outputs(config: ExperimentConfig, team: Team,
                        outcome: SeedOutcome, out_dir: Path) -> None:
    seed_dir = out_dir / f"seed_{outcome.seed}"
    seed_dir.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(seed_dir / "metrics.csv", outcome.records)
    write_eval_csv(seed_dir / "eval.csv", outcome.evals)
    if outcome.diverged:
        (seed_dir / "DIVERGED").write_text(outcome.error + "\n")
        return
    snap_dir = seed_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    manifest = {"algorithm": config.algorithm, "agents": [], "shared_attention": None}
    for i, agent in enumerate(team.agents):
        path = snap_dir / f"agent_{i}.params"
        save_params(agent.to_paramset(), path)
        manifest["agents"].append(path.name)
    if team.is_pat:
        from ..ats import export_shared

        export_shared(team.shared, snap_dir / "shared_attention.params")
        manifest["shared_attention"] = "shared_attention.params"
    (snap_dir / "team.json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_team(config: ExperimentConfig, seed: int, snapshot_dir) -> Team:
    """Rebuild a team from per-seed snapshot files."""
    snap_dir = Path(snapshot_dir)
    manifest = json.loads((snap_dir / "team.json").read_text())
    if manifest["algorithm"] != config.algorithm:
        raise ConfigError(
            f"snapshot was trained with algorithm {manifest['algorithm']}, "
            f"config says {config.algorithm}")
    team = build_team(config, seed)
    for i, agent in enumerate(team.agents):
        agent.load_paramset(load_params(snap_dir / manifest["agents"][i]))
    if team.is_pat and manifest.get("shared_attention"):
        team.shared = import_shared(snap_dir / manifest["shared_attention"],
                                    attention_config_for(config), lr=config.ats.lr)
    return team


def write_manifest(out_dir: Path, config: ExperimentConfig) -> None:
    payload = {
        "version": __version__,
        "seeds": list(config.seeds),
        "config": resolved_mapping(config),
    }
    (out_dir / "manifest.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_training(config: ExperimentConfig, out_dir) -> RunResult:
    """Train every configured seed; write per-seed logs, snapshots, and the
    machine-readable summary. Diverged seeds are recorded and excluded."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if config.ats.pretrained:
        # Fail before any training if the snapshot cannot serve this topology.
        import_shared(config.ats.pretrained, attention_config_for(config), lr=config.ats.lr)
    write_manifest(out_dir, config)

    if config.workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_seed_worker,
                                     [(config, seed, str(out_dir)) for seed in config.seeds]))
    else:
        outcomes = [train_single_seed(config, seed, out_dir) for seed in config.seeds]

    per_seed = {o.seed: o.final_means(config.episodes) for o in outcomes if not o.diverged}
    diverged = tuple(o.seed for o in outcomes if o.diverged)
    if not per_seed:
        raise PatError(f"every seed diverged: {diverged}")
    result = aggregate_metrics(per_seed, diverged)
    write_summary(out_dir / "summary.json", result, config.algorithm, resolved_mapping(config))
    return result


def _seed_worker(args) -> SeedOutcome:
    config, seed, out_dir = args
    return train_single_seed(config, seed, Path(out_dir))


def run_transfer(config: ExperimentConfig, out_dir) -> RunResult:
    """Training run that must start from an imported shared-attention snapshot."""
    if not config.ats.pretrained:
        raise ConfigError("transfer requires ats.pretrained to point at a snapshot")
    if config.algorithm != "PAT":
        raise ConfigError("transfer applies to the PAT algorithm only")
    return run_training(config, out_dir)
