"""Exact value-iteration solver for tiny single-agent instances.

Used as an independent performance yardstick: enumerates every reachable
state of the true (fully observed) MDP, iterates Bellman backups to a sup-norm
tolerance, and reports the optimal expected discounted return from the reset
state. The episode step cap is ignored: termination happens on task
completion only, so instances should be small enough that an optimal policy
finishes long before any cap of interest.
"""

from __future__ import annotations

import numpy as np

from ..errors import OracleRefusalError, UsageError
from .grid import (
    EnvState,
    apply_navigation_rewards,
    apply_treasure_events,
    clone_state,
    object_move_candidates,
    reset,
    resolve_agent_moves,
)
from .spec import MOVING_TREASURE, N_ACTIONS, TREASURE_KINDS, EnvSpec


def _state_key(spec: EnvSpec, state: EnvState):
    if spec.kind in TREASURE_KINDS:
        return (
            state.agent_pos[0],
            tuple(int(v) for v in state.holding[0, :spec.treasure_types]),
            tuple(int(v) for v in state.grid_remaining),
            tuple(int(v) for v in state.bank_deposits),
            tuple(state.grid_pos),
            tuple(state.bank_pos),
        )
    return (state.agent_pos[0],)


def _object_move_distribution(spec: EnvSpec, grid_pos, bank_pos):
    """Exact distribution of the sequential per-object random moves."""
    branches: dict[tuple, float] = {tuple(grid_pos) + tuple(bank_pos): 1.0}
    n = len(grid_pos) + len(bank_pos)
    for idx in range(n):
        nxt: dict[tuple, float] = {}
        for positions, p in branches.items():
            pos_list = list(positions)
            others = set(pos_list) - {pos_list[idx]}
            candidates = object_move_candidates(spec, pos_list[idx], others)
            stay_p = 1.0 - spec.move_noise if candidates else 1.0
            if stay_p > 0.0:
                nxt[positions] = nxt.get(positions, 0.0) + p * stay_p
            if candidates:
                each = spec.move_noise / len(candidates)
                for cand in candidates:
                    moved = list(pos_list)
                    moved[idx] = cand
                    key = tuple(moved)
                    nxt[key] = nxt.get(key, 0.0) + p * each
        branches = nxt
    T = len(grid_pos)
    return [(p, list(k[:T]), list(k[T:])) for k, p in sorted(branches.items())]


def _successors(spec: EnvSpec, state: EnvState, action: int):
    """All (probability, reward, next_state, done) branches of one action."""
    moved = clone_state(state)
    moved.agent_pos = resolve_agent_moves(spec, moved, [action])
    if spec.kind == MOVING_TREASURE:
        object_branches = _object_move_distribution(spec, moved.grid_pos, moved.bank_pos)
    else:
        object_branches = [(1.0, moved.grid_pos, moved.bank_pos)]

    out = []
    for prob, grid_pos, bank_pos in object_branches:
        nxt = clone_state(moved)
        nxt.grid_pos, nxt.bank_pos = list(grid_pos), list(bank_pos)
        rewards = np.full(1, -spec.penalty_step)
        if spec.kind in TREASURE_KINDS:
            apply_treasure_events(spec, nxt, rewards)
            done = bool(nxt.bank_deposits.sum() == spec.treasure_types * spec.treasures_per_grid)
        else:
            done = apply_navigation_rewards(spec, nxt, rewards)
        out.append((prob, float(rewards[0]), nxt, done))
    return out


def oracle_optimal_return(spec: EnvSpec, seed: int = 0, tol: float = 1e-9,
                          state_cap: int = 100_000, max_sweeps: int = 200_000) -> float:
    """Optimal expected discounted return from reset(spec, seed)."""
    if spec.n_agents != 1:
        raise UsageError("the exact oracle handles single-agent instances only")
    start, _ = reset(spec, seed)
    start_key = _state_key(spec, start)

    # Enumerate the reachable state space breadth-first.
    transitions: dict[tuple, list[list[tuple[float, float, tuple, bool]]]] = {}
    frontier = [(start_key, start)]
    states = {start_key: start}
    while frontier:
        key, st = frontier.pop()
        if key in transitions:
            continue
        per_action = []
        for action in range(N_ACTIONS):
            branches = []
            for prob, reward, nxt, done in _successors(spec, st, action):
                nkey = _state_key(spec, nxt)
                branches.append((prob, reward, nkey, done))
                if not done and nkey not in states:
                    states[nkey] = nxt
                    frontier.append((nkey, nxt))
                    if len(states) > state_cap:
                        raise OracleRefusalError(
                            f"state space exceeds cap of {state_cap} states")
            per_action.append(branches)
        transitions[key] = per_action

    values = {key: 0.0 for key in transitions}
    for _ in range(max_sweeps):
        delta = 0.0
        for key, per_action in transitions.items():
            best = -np.inf
            for branches in per_action:
                q = 0.0
                for prob, reward, nkey, done in branches:
                    q += prob * (reward + (0.0 if done else spec.gamma * values[nkey]))
                best = max(best, q)
            delta = max(delta, abs(best - values[key]))
            values[key] = best
        if delta < tol:
            return values[start_key]
    raise OracleRefusalError(f"value iteration did not reach tolerance {tol} "
                             f"within {max_sweeps} sweeps (gamma={spec.gamma})")
