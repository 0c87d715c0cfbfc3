"""Independent Q-learning baseline: one recurrent Q-network per agent,
epsilon-greedy behavior, target copy, replay. No attention, no mode nets."""

from __future__ import annotations

import numpy as np

from ..agent import AgentConfig, RecurrentAgentBase, one_hot, values_of
from ..agent.core import _unroll_batch
from ..nncore import (
    AdamState,
    MlpSpec,
    ParamSet,
    Var,
    adam_step,
    backward,
    init_mlp_params,
    matmul,
    mean_all,
    mlp_forward,
    mul,
    soft_update,
    sub,
)


class DqnAgent(RecurrentAgentBase):
    """Baseline learner over the same encoder substrate as the dual-mode agent."""

    NETWORKS = ("encoder", "qnet")

    def __init__(self, cfg: AgentConfig, rng: np.random.Generator):
        super().__init__(cfg, rng)
        self.qnet_spec = MlpSpec((cfg.d_hidden, *cfg.net_widths, cfg.n_actions))
        self.qnet = init_mlp_params(self.qnet_spec, rng)
        self.qnet_target = self.qnet.copy()
        self.opt_qnet = AdamState(lr=cfg.lr_critic)
        self.epsilon = 1.0  # harness-driven linear decay

    def act(self, m: np.ndarray, explore: bool) -> int:
        if explore and self.rng.random() < self.epsilon:
            return int(self.rng.integers(self.cfg.n_actions))
        q = mlp_forward(self.qnet_spec, values_of(self.qnet), m).value
        return int(np.argmax(q))

    def dqn_loss(self, batch) -> Var:
        cfg = self.cfg
        m_rec = _unroll_batch(self.encoder_spec, self.encoder, [t.window for t in batch])
        q_all = mlp_forward(self.qnet_spec, self.qnet, m_rec)
        taken = one_hot([t.action for t in batch], cfg.n_actions)
        q_taken = matmul(mul(q_all, taken), np.ones(cfg.n_actions))

        m_next = np.stack([t.m_next for t in batch])
        q_next = mlp_forward(self.qnet_spec, values_of(self.qnet_target), m_next).value
        rewards = np.array([t.reward for t in batch])
        live = 1.0 - np.array([float(t.done) for t in batch])
        y = rewards + cfg.gamma * live * q_next.max(axis=-1)

        d = sub(q_taken, y)
        return mean_all(mul(d, d))

    def update(self, batch_size: int | None = None):
        """One TD step (trains the encoder too). None on an empty buffer."""
        if len(self.replay) == 0:
            return None
        k = min(batch_size or self.cfg.batch_size, len(self.replay))
        return run_baseline_dqn_update(self, self.replay.sample(self.rng, k))

    def soft_update_targets(self, tau: float | None = None) -> None:
        soft_update(self.qnet_target, self.qnet, self.cfg.tau_soft if tau is None else tau)

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
        self.qnet_target.load_values(self.qnet)


def run_baseline_dqn_update(agent: DqnAgent, batch) -> float:
    """One TD step on an explicit batch; the loss that was minimized."""
    agent.encoder.zero_grads()
    agent.qnet.zero_grads()
    loss = agent.dqn_loss(batch)
    backward(loss)
    adam_step(agent.qnet, agent.opt_qnet)
    adam_step(agent.encoder, agent.opt_encoder)
    return float(loss.value)
