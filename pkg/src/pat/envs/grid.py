"""Grid engine implementing all three games behind one step function.

Movement: the five discrete actions move one cell or stay; moves into walls or
obstacles resolve to stay; simultaneous-move conflicts resolve by agent-index
priority (lower index wins, the loser stays). Agents never co-occupy a cell.

Collect/deposit/penalty events fire on *new co-location* between an agent and
an object, so they trigger whether the agent stepped onto the object or (in
the moving game) the object stepped onto the agent.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, UsageError
from .spec import MOVING_TREASURE, N_ACTIONS, TREASURE_KINDS, Cell, EnvSpec, observation_length

# (row, col) deltas for up, down, left, right, stay
DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))
ACTION_NAMES = ("up", "down", "left", "right", "stay")


@dataclass
class EnvState:
    agent_pos: list[Cell]
    holding: np.ndarray        # (M, T) units held, 0 or 1 per type
    grid_remaining: np.ndarray  # (T,)
    bank_deposits: np.ndarray   # (T,)
    grid_pos: list[Cell]
    bank_pos: list[Cell]
    landmark_pos: list[Cell]
    step_count: int
    done: bool
    success: bool
    rng: np.random.Generator
    coloc: set = field(default_factory=set)


@dataclass
class StepOutcome:
    obs: np.ndarray       # (M, obs_len)
    rewards: np.ndarray   # (M,)
    done: bool
    success: bool


def reset(spec: EnvSpec, seed: int, layout_seed: int | None = None) -> tuple[EnvState, np.ndarray]:
    """Deterministic function of (spec, seed): places every object on a
    distinct free cell and fills the treasure grids."""
    T = spec.treasure_types
    n_objects = spec.n_agents + (2 * T if spec.kind in TREASURE_KINDS else spec.n_landmarks)
    free = [(r, c) for r in range(spec.height) for c in range(spec.width)
            if (r, c) not in spec.obstacles]
    if n_objects > len(free):
        raise ConfigError(f"{n_objects} objects do not fit on {len(free)} free cells")

    layout_rng = np.random.default_rng(seed if layout_seed is None else layout_seed)
    taken: set[Cell] = set()

    def place(pinned, count) -> list[Cell]:
        if pinned is not None:
            cells = list(pinned)
        else:
            pool = [cell for cell in free if cell not in taken]
            idx = layout_rng.choice(len(pool), size=count, replace=False)
            cells = [pool[i] for i in idx]
        for cell in cells:
            if cell in taken:
                raise ConfigError(f"cell {cell} assigned twice in the layout")
            taken.add(cell)
        return cells

    if spec.kind in TREASURE_KINDS:
        grid_pos = place(spec.grid_cells, T)
        bank_pos = place(spec.bank_cells, T)
        landmark_pos = []
    else:
        grid_pos, bank_pos = [], []
        landmark_pos = place(spec.landmark_cells, spec.n_landmarks)
    agent_pos = place(spec.agent_cells, spec.n_agents)

    state = EnvState(
        agent_pos=agent_pos,
        holding=np.zeros((spec.n_agents, max(T, 1)), dtype=np.int64),
        grid_remaining=np.full(T, spec.treasures_per_grid, dtype=np.int64),
        bank_deposits=np.zeros(T, dtype=np.int64),
        grid_pos=grid_pos,
        bank_pos=bank_pos,
        landmark_pos=landmark_pos,
        step_count=0,
        done=False,
        success=False,
        rng=np.random.default_rng(np.random.SeedSequence(entropy=[seed, 0x5EED])),
    )
    state.coloc = _colocations(state)
    return state, observe_all(spec, state)


def resolve_agent_moves(spec: EnvSpec, state: EnvState, actions) -> list[Cell]:
    """Index-priority conflict resolution; pure function of (state, actions)."""
    resolved: list[Cell] = list(state.agent_pos)
    for i, action in enumerate(actions):
        dr, dc = DELTAS[action]
        if dr == 0 and dc == 0:
            continue
        r, c = state.agent_pos[i]
        target = (r + dr, c + dc)
        if not (0 <= target[0] < spec.height and 0 <= target[1] < spec.width):
            continue
        if target in spec.obstacles:
            continue
        occupied = {resolved[j] for j in range(i)} | {state.agent_pos[j] for j in range(i + 1, len(actions))}
        if target in occupied:
            continue
        resolved[i] = target
    return resolved


def object_move_candidates(spec: EnvSpec, pos: Cell, others: set) -> list[Cell]:
    """Cells a moving object may hop to: in-grid, free of obstacles and of
    other objects (agents do not block objects)."""
    out = []
    for dr, dc in DELTAS[:4]:
        target = (pos[0] + dr, pos[1] + dc)
        if not (0 <= target[0] < spec.height and 0 <= target[1] < spec.width):
            continue
        if target in spec.obstacles or target in others:
            continue
        out.append(target)
    return out


def _move_objects(spec: EnvSpec, state: EnvState) -> None:
    positions = state.grid_pos + state.bank_pos
    for idx in range(len(positions)):
        move = state.rng.random() < spec.move_noise
        if not move:
            continue
        others = set(positions) - {positions[idx]}
        candidates = object_move_candidates(spec, positions[idx], others)
        if not candidates:
            continue
        positions[idx] = candidates[state.rng.integers(len(candidates))]
    T = spec.treasure_types
    state.grid_pos = positions[:T]
    state.bank_pos = positions[T:]


def _colocations(state: EnvState) -> set:
    pairs = set()
    objects = [("grid", g, pos) for g, pos in enumerate(state.grid_pos)]
    objects += [("bank", g, pos) for g, pos in enumerate(state.bank_pos)]
    for i, apos in enumerate(state.agent_pos):
        for kind, g, pos in objects:
            if apos == pos:
                pairs.add((i, kind, g))
    return pairs


def apply_treasure_events(spec: EnvSpec, state: EnvState, rewards: np.ndarray) -> None:
    """Fire collect/deposit/wrong-bank events for newly co-located pairs."""
    now = _colocations(state)
    new_pairs = sorted(now - state.coloc)
    for i, kind, g in new_pairs:
        if kind == "grid":
            if state.grid_remaining[g] > 0 and state.holding[i, g] == 0:
                state.holding[i, g] = 1
                state.grid_remaining[g] -= 1
                rewards[i] += spec.reward_collect
        else:
            matching = int(state.holding[i, g])
            if matching > 0:
                state.bank_deposits[g] += matching
                state.holding[i, g] = 0
                rewards[i] += spec.reward_deposit * matching
            if any(state.holding[i, h] > 0 for h in range(spec.treasure_types) if h != g):
                rewards[i] -= spec.penalty_wrong_bank
    state.coloc = now


def apply_navigation_rewards(spec: EnvSpec, state: EnvState, rewards: np.ndarray) -> bool:
    """Cover rewards plus the shared shaping term; returns the all-covered flag."""
    all_covered = True
    dists = []
    for lpos in state.landmark_pos:
        best_i, best_d = 0, None
        for i, apos in enumerate(state.agent_pos):
            d = abs(apos[0] - lpos[0]) + abs(apos[1] - lpos[1])
            if best_d is None or d < best_d:
                best_i, best_d = i, d
        dists.append(best_d)
        if best_d <= spec.cover_radius:
            rewards[best_i] += spec.reward_cover
        else:
            all_covered = False
    rewards += -spec.shaping_scale * float(np.mean(dists))
    return all_covered


def step(spec: EnvSpec, state: EnvState, actions) -> StepOutcome:
    """Advance one tick. Mutates `state` and returns the outcome."""
    if state.done:
        raise UsageError("step called on a finished episode")
    actions = list(actions)
    if len(actions) != spec.n_agents:
        raise UsageError(f"expected {spec.n_agents} actions, got {len(actions)}")
    for a in actions:
        if not 0 <= int(a) < N_ACTIONS:
            raise UsageError(f"action {a} outside 0..{N_ACTIONS - 1}")

    state.agent_pos = resolve_agent_moves(spec, state, [int(a) for a in actions])
    if spec.kind == MOVING_TREASURE:
        _move_objects(spec, state)

    rewards = np.full(spec.n_agents, -spec.penalty_step, dtype=np.float64)
    if spec.kind in TREASURE_KINDS:
        apply_treasure_events(spec, state, rewards)
        completed = bool(state.bank_deposits.sum() == spec.treasure_types * spec.treasures_per_grid)
    else:
        completed = apply_navigation_rewards(spec, state, rewards)

    state.step_count += 1
    state.success = completed
    state.done = completed or state.step_count >= spec.max_steps
    return StepOutcome(observe_all(spec, state), rewards, state.done, state.success)


def observe_all(spec: EnvSpec, state: EnvState) -> np.ndarray:
    obs = np.zeros((spec.n_agents, observation_length(spec)), dtype=np.float64)
    for i in range(spec.n_agents):
        obs[i] = observe(spec, state, i)
    return obs


def observe(spec: EnvSpec, state: EnvState, agent: int) -> np.ndarray:
    R = spec.obs_radius
    C = spec.cell_channels
    window = np.zeros(((2 * R + 1) ** 2, C), dtype=np.float64)
    ar, ac = state.agent_pos[agent]
    others = {pos for j, pos in enumerate(state.agent_pos) if j != agent}
    grid_at = {pos: g for g, pos in enumerate(state.grid_pos)}
    bank_at = {pos: g for g, pos in enumerate(state.bank_pos)}
    landmarks = set(state.landmark_pos)
    T = spec.treasure_types
    per_grid = spec.treasures_per_grid

    idx = 0
    for dr in range(-R, R + 1):
        for dc in range(-R, R + 1):
            cell = (ar + dr, ac + dc)
            inside = 0 <= cell[0] < spec.height and 0 <= cell[1] < spec.width
            if not inside or cell in spec.obstacles:
                window[idx, 0] = 1.0
            else:
                if cell in others:
                    window[idx, 1] = 1.0
                if spec.kind in TREASURE_KINDS:
                    if cell in grid_at:
                        g = grid_at[cell]
                        window[idx, 2 + g] = state.grid_remaining[g] / per_grid
                    if cell in bank_at:
                        window[idx, 2 + T + bank_at[cell]] = 1.0
                elif cell in landmarks:
                    window[idx, 2] = 1.0
            idx += 1

    inventory = state.holding[agent, :T].astype(np.float64) if T else np.zeros(0)
    position = np.array([ar / max(1, spec.height - 1), ac / max(1, spec.width - 1)])
    return np.concatenate([window.reshape(-1), inventory, position])


def treasure_total(spec: EnvSpec, state: EnvState) -> int:
    """Conserved quantity: units remaining + held + deposited."""
    return int(state.grid_remaining.sum() + state.holding[:, :spec.treasure_types].sum()
               + state.bank_deposits.sum())


def clone_state(state: EnvState) -> EnvState:
    return copy.deepcopy(state)


def render(spec: EnvSpec, state: EnvState) -> str:
    """ASCII grid: agents A<i>, treasure grids T<g>, banks B<g>, landmarks L<g>,
    obstacles #. Agents draw over objects they stand on."""
    cells = {}
    for g, pos in enumerate(state.grid_pos):
        cells[pos] = f"T{g}"
    for g, pos in enumerate(state.bank_pos):
        cells[pos] = f"B{g}"
    for g, pos in enumerate(state.landmark_pos):
        cells[pos] = f"L{g}"
    for i, pos in enumerate(state.agent_pos):
        cells[pos] = f"A{i}"
    rows = []
    for r in range(spec.height):
        row = []
        for c in range(spec.width):
            if (r, c) in spec.obstacles:
                row.append("#".ljust(3))
            else:
                row.append(cells.get((r, c), ".").ljust(3))
        rows.append("".join(row).rstrip())
    return "\n".join(rows)


class GridGame:
    """Stateful wrapper pairing an EnvSpec with its current EnvState."""

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.state: EnvState | None = None

    def reset(self, seed: int, layout_seed: int | None = None) -> np.ndarray:
        self.state, obs = reset(self.spec, seed, layout_seed)
        return obs

    def step(self, actions) -> StepOutcome:
        if self.state is None:
            raise UsageError("step before reset")
        return step(self.spec, self.state, actions)

    @property
    def done(self) -> bool:
        return self.state.done if self.state is not None else True

    def render(self) -> str:
        if self.state is None:
            raise UsageError("render before reset")
        return render(self.spec, self.state)
