"""One decentralized agent: recurrent observation encoder, self-learning
actor-critic with target copies, mode-selection (student) actor-critic, and
both replay buffers.

Training layout:

* The encoder is trained through the self-critic TD loss. Batch items carry a
  truncated-BPTT window (detached start state + the last `k` inputs) and the
  critic input is re-encoded through the live encoder, so gradients reach the
  cell parameters for at most `k` steps.
* Actor-style updates (self actor, mode actor) treat the stored encoding as a
  constant and ascend the relevant critic's value of the deterministic relaxed
  action; exploration noise exists only on the acting path.
* Target copies change exclusively via `soft_update_targets`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..nncore import (
    AdamState,
    LstmCellSpec,
    MlpSpec,
    ParamSet,
    Var,
    adam_step,
    backward,
    cat,
    concat,
    flatten_params,
    init_lstm_params,
    init_mlp_params,
    lstm_step,
    matmul,
    mean_all,
    mlp_forward,
    mul,
    reshape,
    scale,
    sigmoid,
    softmax,
    soft_update,
    sub,
)
from .replay import EncWindow, RingBuffer, StudentTransition, Transition


@dataclass(frozen=True)
class AgentConfig:
    obs_dim: int
    n_actions: int = 5
    d_hidden: int = 32          # encoding dimension
    bptt_window: int = 8        # BPTT truncation k
    net_widths: tuple[int, ...] = (64, 64)
    mode_threshold: float = 0.5
    buffer_capacity: int = 50_000
    batch_size: int = 64
    gamma: float = 0.95
    tau_soft: float = 0.01
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    gumbel_temp: float = 1.0
    gumbel_temp_final: float = 0.1
    mode_noise: float = 0.1
    explore_eps: float = 0.2
    explore_eps_final: float = 0.02

    def __post_init__(self):
        if self.obs_dim < 1 or self.d_hidden < 1 or self.n_actions < 2:
            raise ConfigError("agent dims must be positive (>= 2 actions)")
        if self.bptt_window < 1:
            raise ConfigError("bptt_window must be >= 1")
        if not 0.0 < self.mode_threshold < 1.0:
            raise ConfigError("mode_threshold must lie strictly inside (0, 1)")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")


def values_of(params: ParamSet) -> dict[str, np.ndarray]:
    """Raw value view used to run a network as a constant (no gradients)."""
    return {name: p.value for name, p in params.items()}


def unroll_window(spec: LstmCellSpec, params, window: EncWindow):
    """Re-encode a window from its detached start state; the result carries
    gradients into `params` (and into any inputs passed as Vars)."""
    h, c = window.h0, window.c0
    for x in window.inputs:
        h, c = lstm_step(spec, params, x, (h, c))
    return h


def _unroll_batch(spec: LstmCellSpec, params, windows: list[EncWindow]) -> Var:
    """Batched unroll. Groups equal-length windows so each group runs as one
    (B, .) pass; the output row order matches the input order."""
    n = len(windows)
    by_len: dict[int, list[int]] = {}
    for i, w in enumerate(windows):
        by_len.setdefault(len(w.inputs), []).append(i)
    pieces = []
    rows: list[int] = []
    for L in sorted(by_len):
        group = by_len[L]
        state = (np.stack([windows[j].h0 for j in group]),
                 np.stack([windows[j].c0 for j in group]))
        for t in range(L):
            x = np.stack([windows[j].inputs[t] for j in group])
            state = lstm_step(spec, params, x, state)
        pieces.append(state[0])
        rows.extend(group)
    stacked = concat(pieces, axis=0) if len(pieces) > 1 else pieces[0]
    if rows == list(range(n)):
        return stacked
    # Undo the grouping permutation so output row b corresponds to windows[b].
    perm = np.zeros((n, n))
    for src_row, orig in enumerate(rows):
        perm[orig, src_row] = 1.0
    return matmul(perm, stacked)


def one_hot(indices, n: int) -> np.ndarray:
    idx = np.atleast_1d(np.asarray(indices, dtype=int))
    out = np.zeros((idx.size, n))
    out[np.arange(idx.size), idx] = 1.0
    return out


def mode_from_probability(w: float, threshold: float) -> bool:
    """Student mode iff the (possibly noised) mode probability clears the threshold."""
    return w > threshold


# Update-time relaxed actions use a fixed softmax temperature; only the acting
# path anneals (a saturated relaxation would zero the policy gradient).
RELAX_TEMP = 1.0


class RecurrentAgentBase:
    """Shared recurrent-encoder plumbing: episode trace, encoding, windows."""

    def __init__(self, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.rng = rng
        H = cfg.d_hidden
        self.encoder_spec = LstmCellSpec(cfg.obs_dim + cfg.n_actions, H)
        self.encoder = init_lstm_params(self.encoder_spec, rng)
        self.opt_encoder = AdamState(lr=cfg.lr_critic)
        self.replay = RingBuffer(cfg.buffer_capacity)
        self._h = np.zeros(H)
        self._c = np.zeros(H)
        self._inputs: list[np.ndarray] = []
        self._state_trace: list[tuple[np.ndarray, np.ndarray]] = [(self._h, self._c)]

    def begin_episode(self) -> None:
        H = self.cfg.d_hidden
        self._h = np.zeros(H)
        self._c = np.zeros(H)
        self._inputs = []
        self._state_trace = [(self._h, self._c)]

    def encode_observation(self, obs: np.ndarray, prev_action: int | None) -> np.ndarray:
        """Advance the recurrent state with (o_t, a_{t-1}) and return the encoding."""
        prev = np.zeros(self.cfg.n_actions) if prev_action is None \
            else one_hot(prev_action, self.cfg.n_actions)[0]
        x = np.concatenate([np.asarray(obs, dtype=np.float64), prev])
        hv, cv = lstm_step(self.encoder_spec, self.encoder, x, (self._h, self._c))
        self._h, self._c = hv.value, cv.value
        self._inputs.append(x)
        self._state_trace.append((self._h, self._c))
        return self._h

    def current_window(self) -> EncWindow:
        """BPTT window ending at the most recent encoding."""
        t = len(self._inputs)
        start = max(0, t - self.cfg.bptt_window)
        h0, c0 = self._state_trace[start]
        return EncWindow(h0=h0, c0=c0, inputs=tuple(self._inputs[start:t]))

    def history_state(self) -> np.ndarray:
        """Episode-persistent (h, c) concatenation offered to attention keys."""
        return np.concatenate([self._h, self._c])

    def store_transition(self, m, window, action, reward, m_next, done) -> None:
        self.replay.append(Transition(m=m, action=int(action), reward=float(reward),
                                      m_next=m_next, done=bool(done), window=window))


class PatAgent(RecurrentAgentBase):
    """Dual-mode agent: self-learning path plus mode-selection path."""

    def __init__(self, cfg: AgentConfig, rng: np.random.Generator):
        super().__init__(cfg, rng)
        A, H = cfg.n_actions, cfg.d_hidden

        self.actor_spec = MlpSpec((H, *cfg.net_widths, A))
        self.critic_spec = MlpSpec((H + A, *cfg.net_widths, 1))
        self.mode_actor_spec = MlpSpec((H, *cfg.net_widths, 1))
        self.mode_critic_spec = MlpSpec((H + 1, *cfg.net_widths, 1))

        self.actor = init_mlp_params(self.actor_spec, rng)
        self.critic = init_mlp_params(self.critic_spec, rng)
        self.mode_actor = init_mlp_params(self.mode_actor_spec, rng)
        self.mode_critic = init_mlp_params(self.mode_critic_spec, rng)

        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.mode_actor_target = self.mode_actor.copy()
        self.mode_critic_target = self.mode_critic.copy()

        self.opt_actor = AdamState(lr=cfg.lr_actor)
        self.opt_critic = AdamState(lr=cfg.lr_critic)
        self.opt_mode_actor = AdamState(lr=cfg.lr_actor)
        self.opt_mode_critic = AdamState(lr=cfg.lr_critic)

        self.student_replay = RingBuffer(cfg.buffer_capacity)

        # Exploration schedule state, adjusted by the harness.
        self.gumbel_temp = cfg.gumbel_temp
        self.mode_noise = cfg.mode_noise
        self.explore_eps = cfg.explore_eps

    def flat_actor(self) -> np.ndarray:
        return flatten_params(self.actor)

    def decide_mode(self, m: np.ndarray, training: bool) -> tuple[bool, float]:
        """Mode probability through the mode actor; student iff it clears the
        threshold after (training-only) exploration noise."""
        w = float(_sigmoid_scalar(mlp_forward(self.mode_actor_spec, values_of(self.mode_actor), m).value[0]))
        if training and self.mode_noise > 0.0:
            w_exec = float(np.clip(w + self.rng.uniform(-self.mode_noise, self.mode_noise), 0.0, 1.0))
        else:
            w_exec = w
        return mode_from_probability(w_exec, self.cfg.mode_threshold), w_exec

    def act_self(self, m: np.ndarray, explore: bool) -> int:
        if explore and self.explore_eps > 0.0 and self.rng.random() < self.explore_eps:
            return int(self.rng.integers(self.cfg.n_actions))
        logits = mlp_forward(self.actor_spec, values_of(self.actor), m).value
        if explore:
            gumbel = -np.log(-np.log(self.rng.uniform(1e-12, 1.0, size=logits.shape)))
            return int(np.argmax(logits / max(self.gumbel_temp, 1e-8) + gumbel))
        return int(np.argmax(logits))

    def critic_value(self, m: np.ndarray, action: int) -> float:
        x = np.concatenate([m, one_hot(action, self.cfg.n_actions)[0]])
        return float(mlp_forward(self.critic_spec, values_of(self.critic), x).value[0])

    def student_reward(self, m: np.ndarray, advised_action: int, self_action: int) -> float:
        """Estimated value gain of the advised action over the self action."""
        return self.critic_value(m, advised_action) - self.critic_value(m, self_action)

    # ----- storage --------------------------------------------------------

    def store_student_transition(self, m, w, reward, m_next) -> None:
        self.student_replay.append(StudentTransition(m=m, w=float(w),
                                                     reward=float(reward), m_next=m_next))

    # ----- objectives (pure graph builders, shared with gradient tests) ----

    def self_critic_loss(self, batch: list[Transition]) -> Var:
        cfg = self.cfg
        m_rec = _unroll_batch(self.encoder_spec, self.encoder, [t.window for t in batch])
        actions = one_hot([t.action for t in batch], cfg.n_actions)
        q = reshape(mlp_forward(self.critic_spec, self.critic,
                                cat([m_rec, actions], axis=-1)), (len(batch),))

        m_next = np.stack([t.m_next for t in batch])
        next_logits = mlp_forward(self.actor_spec, values_of(self.actor_target), m_next).value
        shifted = next_logits / RELAX_TEMP
        shifted -= shifted.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        next_actions = e / e.sum(axis=-1, keepdims=True)  # target policy's relaxed action
        q_next = mlp_forward(self.critic_spec, values_of(self.critic_target),
                             np.concatenate([m_next, next_actions], axis=-1)).value[:, 0]
        rewards = np.array([t.reward for t in batch])
        live = 1.0 - np.array([float(t.done) for t in batch])
        y = rewards + cfg.gamma * live * q_next

        d = sub(q, y)
        return mean_all(mul(d, d))

    def self_actor_objective(self, batch: list[Transition]) -> Var:
        m = np.stack([t.m for t in batch])
        logits = mlp_forward(self.actor_spec, self.actor, m)
        relaxed = softmax(scale(logits, 1.0 / RELAX_TEMP), axis=-1)
        q = mlp_forward(self.critic_spec, values_of(self.critic), cat([m, relaxed], axis=-1))
        return mean_all(q)

    def student_critic_loss(self, batch: list[StudentTransition]) -> Var:
        cfg = self.cfg
        m = np.stack([t.m for t in batch])
        w = np.array([[t.w] for t in batch])
        q = reshape(mlp_forward(self.mode_critic_spec, self.mode_critic,
                                cat([m, w], axis=-1)), (len(batch),))

        m_next = np.stack([t.m_next for t in batch])
        w_next = _sigmoid_scalar(mlp_forward(self.mode_actor_spec,
                                             values_of(self.mode_actor_target), m_next).value)
        q_next = mlp_forward(self.mode_critic_spec, values_of(self.mode_critic_target),
                             np.concatenate([m_next, w_next], axis=-1)).value[:, 0]
        rewards = np.array([t.reward for t in batch])
        y = rewards + cfg.gamma * q_next

        d = sub(q, y)
        return mean_all(mul(d, d))

    def student_actor_objective(self, batch: list[StudentTransition]) -> Var:
        m = np.stack([t.m for t in batch])
        w = sigmoid(mlp_forward(self.mode_actor_spec, self.mode_actor, m))
        q = mlp_forward(self.mode_critic_spec, values_of(self.mode_critic),
                        cat([m, w], axis=-1))
        return mean_all(q)

    # ----- updates ----------------------------------------------------------

    def update_self(self, batch_size: int | None = None):
        """One critic step (TD, trains encoder too) and one actor step.
        Returns (critic_loss, actor_objective) or None when the buffer is empty."""
        if len(self.replay) == 0:
            return None
        k = min(batch_size or self.cfg.batch_size, len(self.replay))
        batch = self.replay.sample(self.rng, k)

        self.encoder.zero_grads()
        self.critic.zero_grads()
        loss = self.self_critic_loss(batch)
        backward(loss)
        adam_step(self.critic, self.opt_critic)
        adam_step(self.encoder, self.opt_encoder)

        self.actor.zero_grads()
        objective = self.self_actor_objective(batch)
        backward(scale(objective, -1.0))
        adam_step(self.actor, self.opt_actor)
        return float(loss.value), float(objective.value)

    def update_student(self, batch_size: int | None = None):
        if len(self.student_replay) == 0:
            return None
        k = min(batch_size or self.cfg.batch_size, len(self.student_replay))
        batch = self.student_replay.sample(self.rng, k)

        self.mode_critic.zero_grads()
        loss = self.student_critic_loss(batch)
        backward(loss)
        adam_step(self.mode_critic, self.opt_mode_critic)

        self.mode_actor.zero_grads()
        objective = self.student_actor_objective(batch)
        backward(scale(objective, -1.0))
        adam_step(self.mode_actor, self.opt_mode_actor)
        return float(loss.value), float(objective.value)

    def soft_update_targets(self, tau: float | None = None) -> None:
        tau = self.cfg.tau_soft if tau is None else tau
        soft_update(self.actor_target, self.actor, tau)
        soft_update(self.critic_target, self.critic, tau)
        soft_update(self.mode_actor_target, self.mode_actor, tau)
        soft_update(self.mode_critic_target, self.mode_critic, tau)

    # ----- snapshots --------------------------------------------------------

    NETWORKS = ("encoder", "actor", "critic", "mode_actor", "mode_critic")

    def to_paramset(self) -> ParamSet:
        out = ParamSet()
        for net in self.NETWORKS:
            out.merged(f"{net}/", getattr(self, net))
        return out

    def load_paramset(self, snapshot: ParamSet) -> None:
        for net in self.NETWORKS:
            own: ParamSet = getattr(self, net)
            for name, p in own.items():
                p.value[...] = snapshot[f"{net}/{name}"].value
        for target, online in (
            (self.actor_target, self.actor),
            (self.critic_target, self.critic),
            (self.mode_actor_target, self.mode_actor),
            (self.mode_critic_target, self.mode_critic),
        ):
            target.load_values(online)


def _sigmoid_scalar(z):
    return 1.0 / (1.0 + np.exp(-z))
