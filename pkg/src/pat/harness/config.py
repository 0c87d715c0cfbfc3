"""Experiment configuration: plain-text key-value files plus overrides.

File format: one ``key = value`` pair per line; ``#`` starts a comment;
blank lines are ignored. Unknown keys are hard errors. The full key list:

Run control
    algorithm            PAT | IQL                      (default PAT)
    episodes             training episodes per seed     (default 200)
    warmup_episodes      self-learning/ATS only phase   (default 20)
    eval_every           evaluation cadence, episodes   (default 25)
    eval_episodes        greedy episodes per checkpoint (default 5)
    seeds                comma list, e.g. 0,1,2,3,4     (default 0,1,2,3,4)
    update_every         env steps between updates      (default 1)
    workers              parallel seed workers          (default 1)

Environment (env.*)
    env.kind             grid_treasure | moving_treasure | coop_nav
    env.width, env.height, env.agents, env.treasure_types,
    env.max_steps, env.obs_radius, env.move_noise, env.gamma,
    env.reward_collect, env.reward_deposit, env.penalty_wrong_bank,
    env.penalty_step, env.reward_cover, env.shaping_scale, env.cover_radius,
    env.obstacles        semicolon list of r,c cells, e.g. 1,1;2,3
    env.fixed_layout     reuse one layout for every episode (default false)
    env.agent_cells, env.grid_cells, env.bank_cells, env.landmark_cells
                         optional pinned placements (same r,c;r,c syntax);
                         blank means random placement from the episode seed

Agent (agent.*)
    agent.d_hidden, agent.bptt_window, agent.net_widths (comma list),
    agent.batch_size, agent.buffer_capacity, agent.mode_threshold,
    agent.tau_soft, agent.lr_actor, agent.lr_critic, agent.gumbel_temp,
    agent.gumbel_temp_final, agent.mode_noise,
    agent.explore_eps, agent.explore_eps_final (uniform-action floor),
    agent.epsilon_start, agent.epsilon_final   (baseline exploration)

Shared attention (ats.*)
    ats.heads, ats.d_query, ats.d_value, ats.dropout, ats.lr,
    ats.batch_size, ats.buffer_capacity, ats.update_every,
    ats.identity_init    start value/decode maps near identity
                         (requires ats.d_value = 0, i.e. full width)
    ats.pretrained       path to a shared-attention snapshot (transfer)
    ats.freeze           keep imported attention fixed (default false)
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

from ..envs import EnvSpec, KINDS
from ..errors import ConfigError

ALGORITHMS = ("PAT", "IQL")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_int_list(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    return tuple(int(part.strip()) for part in raw.split(","))


def _parse_cells(raw: str) -> frozenset:
    raw = raw.strip()
    if not raw:
        return frozenset()
    cells = []
    for chunk in raw.split(";"):
        r, c = chunk.split(",")
        cells.append((int(r), int(c)))
    return frozenset(cells)


def _parse_cell_tuple(raw: str):
    raw = raw.strip()
    if not raw:
        return None
    cells = []
    for chunk in raw.split(";"):
        r, c = chunk.split(",")
        cells.append((int(r), int(c)))
    return tuple(cells)


def _parse_optional_int(raw: str):
    raw = raw.strip()
    return None if not raw else int(raw)


def _parse_optional_str(raw: str):
    raw = raw.strip()
    return None if not raw else raw


# key -> (parser, default)
KEY_REGISTRY: dict = {
    "algorithm": (str.strip, "PAT"),
    "episodes": (int, 200),
    "warmup_episodes": (int, 20),
    "eval_every": (int, 25),
    "eval_episodes": (int, 5),
    "seeds": (_parse_int_list, (0, 1, 2, 3, 4)),
    "update_every": (int, 1),
    "workers": (int, 1),
    "env.kind": (str.strip, "grid_treasure"),
    "env.width": (int, 8),
    "env.height": (int, 8),
    "env.agents": (int, 4),
    "env.treasure_types": (_parse_optional_int, None),
    "env.max_steps": (int, 1000),
    "env.obs_radius": (int, 2),
    "env.move_noise": (float, 1.0),
    "env.gamma": (float, 0.95),
    "env.reward_collect": (float, 1.0),
    "env.reward_deposit": (float, 10.0),
    "env.penalty_wrong_bank": (float, 10.0),
    "env.penalty_step": (float, 0.01),
    "env.reward_cover": (float, 1.0),
    "env.shaping_scale": (float, 0.1),
    "env.cover_radius": (int, 0),
    "env.obstacles": (_parse_cells, frozenset()),
    "env.fixed_layout": (_parse_bool, False),
    "env.agent_cells": (_parse_cell_tuple, None),
    "env.grid_cells": (_parse_cell_tuple, None),
    "env.bank_cells": (_parse_cell_tuple, None),
    "env.landmark_cells": (_parse_cell_tuple, None),
    "agent.d_hidden": (int, 32),
    "agent.bptt_window": (int, 8),
    "agent.net_widths": (_parse_int_list, (64, 64)),
    "agent.batch_size": (int, 64),
    "agent.buffer_capacity": (int, 50_000),
    "agent.mode_threshold": (float, 0.5),
    "agent.tau_soft": (float, 0.01),
    "agent.lr_actor": (float, 1e-4),
    "agent.lr_critic": (float, 1e-3),
    "agent.gumbel_temp": (float, 1.0),
    "agent.gumbel_temp_final": (float, 0.1),
    "agent.mode_noise": (float, 0.1),
    "agent.explore_eps": (float, 0.2),
    "agent.explore_eps_final": (float, 0.02),
    "agent.epsilon_start": (float, 1.0),
    "agent.epsilon_final": (float, 0.05),
    "ats.heads": (int, 4),
    "ats.d_query": (int, 32),
    "ats.d_value": (int, 64),
    "ats.dropout": (float, 0.1),
    "ats.lr": (float, 1e-3),
    "ats.batch_size": (int, 32),
    "ats.buffer_capacity": (int, 512),
    "ats.update_every": (int, 1),
    "ats.identity_init": (_parse_bool, False),
    "ats.pretrained": (_parse_optional_str, None),
    "ats.freeze": (_parse_bool, False),
}


@dataclass(frozen=True)
class AtsKnobs:
    heads: int = 4
    d_query: int = 32
    d_value: int = 64
    dropout: float = 0.1
    lr: float = 1e-3
    batch_size: int = 32
    buffer_capacity: int = 512
    update_every: int = 1
    identity_init: bool = False
    pretrained: str | None = None
    freeze: bool = False


@dataclass(frozen=True)
class AgentKnobs:
    d_hidden: int = 32
    bptt_window: int = 8
    net_widths: tuple[int, ...] = (64, 64)
    batch_size: int = 64
    buffer_capacity: int = 50_000
    mode_threshold: float = 0.5
    tau_soft: float = 0.01
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    gumbel_temp: float = 1.0
    gumbel_temp_final: float = 0.1
    mode_noise: float = 0.1
    explore_eps: float = 0.2
    explore_eps_final: float = 0.02
    epsilon_start: float = 1.0
    epsilon_final: float = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    algorithm: str = "PAT"
    episodes: int = 200
    warmup_episodes: int = 20
    eval_every: int = 25
    eval_episodes: int = 5
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    update_every: int = 1
    workers: int = 1
    env: EnvSpec = field(default_factory=lambda: EnvSpec(kind="grid_treasure"))
    fixed_layout: bool = False
    agent: AgentKnobs = field(default_factory=AgentKnobs)
    ats: AtsKnobs = field(default_factory=AtsKnobs)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.seeds:
            raise ConfigError("seed list must be non-empty")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if self.eval_every < 1 or self.eval_episodes < 1:
            raise ConfigError("eval cadence and episode count must be >= 1")
        if self.update_every < 1 or self.workers < 1:
            raise ConfigError("update_every and workers must be >= 1")
        if not 0 <= self.warmup_episodes:
            raise ConfigError("warmup_episodes must be >= 0")


def parse_entries(text: str) -> dict[str, str]:
    """Raw key -> value strings from config-file text; unknown keys are errors."""
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.rstrip()!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in KEY_REGISTRY:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        entries[key] = value.strip()
    return entries


def apply_overrides(entries: dict[str, str], overrides: list[str]) -> dict[str, str]:
    """Apply repeated ``key=value`` override pairs; they win over file values."""
    out = dict(entries)
    for pair in overrides:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, value = pair.split("=", 1)
        key = key.strip()
        if key not in KEY_REGISTRY:
            raise ConfigError(f"unknown config key {key!r} in override")
        out[key] = value.strip()
    return out


def resolve(entries: dict[str, str]) -> dict:
    """Typed values for every registry key (defaults where unset)."""
    values = {}
    for key, (parser, default) in KEY_REGISTRY.items():
        if key in entries:
            try:
                values[key] = parser(entries[key])
            except ConfigError:
                raise
            except Exception as exc:
                raise ConfigError(f"bad value for {key}: {entries[key]!r} ({exc})") from exc
        else:
            values[key] = default
    return values


def build_config(values: dict) -> ExperimentConfig:
    if values["env.kind"] not in KINDS:
        raise ConfigError(f"env.kind must be one of {KINDS}, got {values['env.kind']!r}")
    env = EnvSpec(
        kind=values["env.kind"],
        width=values["env.width"],
        height=values["env.height"],
        n_agents=values["env.agents"],
        n_treasure_types=values["env.treasure_types"],
        reward_collect=values["env.reward_collect"],
        reward_deposit=values["env.reward_deposit"],
        penalty_wrong_bank=values["env.penalty_wrong_bank"],
        penalty_step=values["env.penalty_step"],
        reward_cover=values["env.reward_cover"],
        shaping_scale=values["env.shaping_scale"],
        cover_radius=values["env.cover_radius"],
        max_steps=values["env.max_steps"],
        obs_radius=values["env.obs_radius"],
        move_noise=values["env.move_noise"],
        obstacles=values["env.obstacles"],
        gamma=values["env.gamma"],
        agent_cells=values["env.agent_cells"],
        grid_cells=values["env.grid_cells"],
        bank_cells=values["env.bank_cells"],
        landmark_cells=values["env.landmark_cells"],
    )
    agent = AgentKnobs(**{f.name: values[f"agent.{f.name}"] for f in fields(AgentKnobs)})
    ats = AtsKnobs(**{f.name: values[f"ats.{f.name}"] for f in fields(AtsKnobs)})
    return ExperimentConfig(
        algorithm=values["algorithm"],
        episodes=values["episodes"],
        warmup_episodes=values["warmup_episodes"],
        eval_every=values["eval_every"],
        eval_episodes=values["eval_episodes"],
        seeds=values["seeds"],
        update_every=values["update_every"],
        workers=values["workers"],
        env=env,
        fixed_layout=values["env.fixed_layout"],
        agent=agent,
        ats=ats,
    )


def load_config(path=None, overrides: list[str] | None = None,
                text: str | None = None) -> ExperimentConfig:
    """Parse a config file (or literal text) with optional overrides."""
    if text is None:
        text = Path(path).read_text() if path is not None else ""
    entries = parse_entries(text)
    if overrides:
        entries = apply_overrides(entries, overrides)
    return build_config(resolve(entries))


def resolved_mapping(config: ExperimentConfig) -> dict[str, str]:
    """Flat key -> rendered-value view of a config (manifest contents)."""
    env, agent, ats = config.env, config.agent, config.ats
    out = {
        "algorithm": config.algorithm,
        "episodes": str(config.episodes),
        "warmup_episodes": str(config.warmup_episodes),
        "eval_every": str(config.eval_every),
        "eval_episodes": str(config.eval_episodes),
        "seeds": ",".join(str(s) for s in config.seeds),
        "update_every": str(config.update_every),
        "workers": str(config.workers),
        "env.kind": env.kind,
        "env.width": str(env.width),
        "env.height": str(env.height),
        "env.agents": str(env.n_agents),
        "env.treasure_types": "" if env.n_treasure_types is None else str(env.n_treasure_types),
        "env.max_steps": str(env.max_steps),
        "env.obs_radius": str(env.obs_radius),
        "env.move_noise": repr(env.move_noise),
        "env.gamma": repr(env.gamma),
        "env.reward_collect": repr(env.reward_collect),
        "env.reward_deposit": repr(env.reward_deposit),
        "env.penalty_wrong_bank": repr(env.penalty_wrong_bank),
        "env.penalty_step": repr(env.penalty_step),
        "env.reward_cover": repr(env.reward_cover),
        "env.shaping_scale": repr(env.shaping_scale),
        "env.cover_radius": str(env.cover_radius),
        "env.obstacles": ";".join(f"{r},{c}" for r, c in sorted(env.obstacles)),
        "env.fixed_layout": str(config.fixed_layout).lower(),
    }
    for key, cells in (("env.agent_cells", env.agent_cells), ("env.grid_cells", env.grid_cells),
                       ("env.bank_cells", env.bank_cells), ("env.landmark_cells", env.landmark_cells)):
        out[key] = "" if cells is None else ";".join(f"{r},{c}" for r, c in cells)
    for f in fields(AgentKnobs):
        value = getattr(agent, f.name)
        out[f"agent.{f.name}"] = ",".join(map(str, value)) if isinstance(value, tuple) else repr(value)
    for f in fields(AtsKnobs):
        value = getattr(ats, f.name)
        if value is None:
            value = ""
        out[f"ats.{f.name}"] = str(value).lower() if isinstance(value, bool) else str(value)
    return out
