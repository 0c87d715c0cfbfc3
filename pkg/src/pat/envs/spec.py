"""Environment configuration and observation layout.

Three grid games share one engine:

* ``grid_treasure``  — static treasure grids and banks; collect, then deposit.
* ``moving_treasure`` — same rules, but grids and banks take random steps.
* ``coop_nav``       — cover every landmark; shared distance shaping.

Observations are egocentric: a (2R+1)^2 window of per-cell channel values,
followed by the agent's inventory counts and its normalized position. Channel
layout per cell is [obstacle, other-agent, grid_0..grid_{T-1}, bank_0..bank_{T-1}]
for the treasure games (grid channels scaled by remaining/M) and
[obstacle, other-agent, landmark] for navigation. All values lie in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError

GRID_TREASURE = "grid_treasure"
MOVING_TREASURE = "moving_treasure"
COOP_NAV = "coop_nav"
KINDS = (GRID_TREASURE, MOVING_TREASURE, COOP_NAV)
TREASURE_KINDS = (GRID_TREASURE, MOVING_TREASURE)

N_ACTIONS = 5  # up, down, left, right, stay

Cell = tuple[int, int]


@dataclass(frozen=True)
class EnvSpec:
    kind: str
    width: int = 8
    height: int = 8
    n_agents: int = 4
    n_treasure_types: int | None = None  # defaults to n_agents // 2
    reward_collect: float = 1.0
    reward_deposit: float = 10.0
    penalty_wrong_bank: float = 10.0  # magnitude, subtracted
    penalty_step: float = 0.01  # magnitude, subtracted every step
    reward_cover: float = 1.0
    shaping_scale: float = 0.1
    cover_radius: int = 0
    max_steps: int = 1000
    obs_radius: int = 2
    move_noise: float = 1.0  # moving game: per-object step probability
    obstacles: frozenset = frozenset()
    gamma: float = 0.95
    # Optional pinned placements (tests, oracle instances). Random when None.
    agent_cells: tuple[Cell, ...] | None = None
    grid_cells: tuple[Cell, ...] | None = None
    bank_cells: tuple[Cell, ...] | None = None
    landmark_cells: tuple[Cell, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown environment kind {self.kind!r}")
        if self.width < 2 or self.height < 2:
            raise ConfigError("grid must be at least 2x2")
        if self.n_agents < 1:
            raise ConfigError("need at least one agent")
        if self.kind in TREASURE_KINDS and self.n_agents > 1 and self.n_agents % 2:
            raise ConfigError("treasure games need an even agent count (or a single agent)")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 <= self.move_noise <= 1.0:
            raise ConfigError("move_noise must lie in [0, 1]")
        if self.obs_radius < 1:
            raise ConfigError("obs_radius must be >= 1")
        if self.treasure_types < 0 or (self.kind in TREASURE_KINDS and self.treasure_types < 1):
            raise ConfigError("treasure games need at least one treasure type")
        for cell in self.obstacles:
            self._check_cell(cell, "obstacle")
        for name, cells, expected in (
            ("agent_cells", self.agent_cells, self.n_agents),
            ("grid_cells", self.grid_cells, self.treasure_types if self.kind in TREASURE_KINDS else 0),
            ("bank_cells", self.bank_cells, self.treasure_types if self.kind in TREASURE_KINDS else 0),
            ("landmark_cells", self.landmark_cells, self.n_agents if self.kind == COOP_NAV else 0),
        ):
            if cells is None:
                continue
            if len(cells) != expected:
                raise ConfigError(f"{name} must list exactly {expected} cells, got {len(cells)}")
            for cell in cells:
                self._check_cell(cell, name)
                if cell in self.obstacles:
                    raise ConfigError(f"{name} cell {cell} sits on an obstacle")

    def _check_cell(self, cell, what: str):
        r, c = cell
        if not (0 <= r < self.height and 0 <= c < self.width):
            raise ConfigError(f"{what} cell {cell} outside the {self.height}x{self.width} grid")

    @property
    def treasure_types(self) -> int:
        if self.kind == COOP_NAV:
            return 0
        if self.n_treasure_types is not None:
            return self.n_treasure_types
        return max(1, self.n_agents // 2)

    @property
    def treasures_per_grid(self) -> int:
        return self.n_agents

    @property
    def n_landmarks(self) -> int:
        return self.n_agents if self.kind == COOP_NAV else 0

    @property
    def cell_channels(self) -> int:
        if self.kind == COOP_NAV:
            return 3
        return 2 + 2 * self.treasure_types

    @property
    def inventory_length(self) -> int:
        return self.treasure_types


def action_space(spec: EnvSpec) -> int:
    return N_ACTIONS


def observation_length(spec: EnvSpec) -> int:
    window = (2 * spec.obs_radius + 1) ** 2
    return window * spec.cell_channels + spec.inventory_length + 2
