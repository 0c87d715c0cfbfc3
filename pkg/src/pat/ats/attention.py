"""Team-shared attention teacher selector.

One instance serves the whole team. A student's encoding is the query;
teachers offer (learning-history, flattened-actor-parameters) packets as
key/value pairs. Per head: scaled dot-product weights over teachers, a
weighted sum of compressed parameter values, then a shared decoder maps the
concatenated heads back to a full flattened actor parameter vector. The
student's advised action is the decoded actor evaluated on its own encoding.

Parameter shapes depend only on (d_model, d_history, d_query, d_value,
n_heads, actor topology) — never on the team size — which is what makes the
trained selector transferable between teams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import AdviceUnavailableError, ConfigError, DimensionError, IncompatibleSnapshotError
from ..nncore import (
    AdamState,
    MlpSpec,
    ParamSet,
    Var,
    adam_step,
    backward,
    cat,
    concat,
    load_params,
    matmul,
    mean_all,
    mlp_forward,
    param_spans,
    reshape,
    save_params,
    scale,
    slice_axis,
    softmax,
    transpose,
)

HEADER_KEY = "__header__"
ACTOR_WIDTHS_KEY = "__actor_widths__"
HEADER_FIELDS = ("d_model", "d_history", "d_query", "d_value", "param_count", "n_heads", "dropout")


@dataclass(frozen=True)
class AttentionConfig:
    d_model: int       # query input dim (student encoding)
    d_history: int     # key input dim (teacher history encoding)
    d_query: int       # projection dim shared by queries and keys
    d_value: int       # compressed value dim per head
    n_heads: int
    dropout: float
    actor_spec: MlpSpec
    # Start W_v near identity and W_t near a head-average, so the initial
    # advice is a plain parameter average instead of a random projection.
    # Requires d_value == actor param count.
    identity_value_init: bool = False

    def __post_init__(self):
        if min(self.d_model, self.d_history, self.d_query, self.d_value, self.n_heads) < 1:
            raise ConfigError("attention dims and head count must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.actor_spec.in_dim != self.d_model:
            raise ConfigError("decoded actor must consume the student encoding")
        if self.identity_value_init and self.d_value != self.actor_spec.param_count():
            raise ConfigError("identity value init needs d_value == actor parameter count")

    @property
    def param_count(self) -> int:
        return self.actor_spec.param_count()

    def header(self) -> np.ndarray:
        return np.array([self.d_model, self.d_history, self.d_query, self.d_value,
                         self.param_count, self.n_heads, self.dropout], dtype=np.float64)


@dataclass(frozen=True)
class TeacherPacket:
    """Immutable snapshot a teacher offers: its id, episode-persistent history
    encoding, and flattened actor parameters."""

    teacher_id: int
    history: np.ndarray   # (d_history,)
    theta: np.ndarray     # (param_count,)


@dataclass(frozen=True)
class AdviceResult:
    action: int
    weights: tuple        # per head, (J,) arrays summing to 1
    logits: tuple         # per head, pre-softmax scores (J,)
    decoded: np.ndarray   # fused flattened actor parameters (param_count,)


@dataclass
class AtsItem:
    """One student-mode step queued for the shared update."""

    m: np.ndarray
    packets: tuple
    executed_action: int
    critic_spec: MlpSpec
    critic: ParamSet  # live reference to the owner's critic


class SharedAttention:
    """Parameter holder plus optimizer state for the team-shared selector."""

    def __init__(self, config: AttentionConfig, rng: np.random.Generator, lr: float = 1e-3):
        self.config = config
        P = config.param_count
        params = ParamSet()
        for h in range(config.n_heads):
            params.add(f"h{h}.W_q", _uniform(rng, (config.d_query, config.d_model)))
            params.add(f"h{h}.W_k", _uniform(rng, (config.d_query, config.d_history)))
            if config.identity_value_init:
                params.add(f"h{h}.W_v", np.eye(P) + _uniform(rng, (P, P)) * 0.01)
            else:
                params.add(f"h{h}.W_v", _uniform(rng, (config.d_value, P)))
        if config.identity_value_init:
            blend = np.concatenate([np.eye(P) / config.n_heads] * config.n_heads, axis=1)
            params.add("W_t", blend + _uniform(rng, blend.shape) * 0.01)
        else:
            params.add("W_t", _uniform(rng, (P, config.n_heads * config.d_value)))
        self.params = params
        self.opt = AdamState(lr=lr)
        self._actor_template = _zero_mlp_template(config.actor_spec)
        self._spans = param_spans(self._actor_template)


def _uniform(rng: np.random.Generator, shape) -> np.ndarray:
    limit = 1.0 / np.sqrt(shape[-1])
    return rng.uniform(-limit, limit, size=shape)


def _zero_mlp_template(spec: MlpSpec) -> ParamSet:
    template = ParamSet()
    for layer, (fan_in, fan_out) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
        template.add(f"l{layer}.W", np.zeros((fan_out, fan_in)))
        template.add(f"l{layer}.b", np.zeros(fan_out))
    return template


def _require_packets(packets) -> tuple:
    packets = tuple(packets)
    if not packets:
        raise AdviceUnavailableError("no teacher packets available")
    return packets


def _head_scores(shared: SharedAttention, m: np.ndarray, packets) -> list[tuple[Var, Var]]:
    """Per head (logits, weights) graph nodes over the packet axis."""
    cfg = shared.config
    histories = np.stack([p.history for p in packets])  # (J, d_history)
    if histories.shape[1] != cfg.d_history:
        raise DimensionError(f"packet history dim {histories.shape[1]} != {cfg.d_history}")
    if m.shape[-1] != cfg.d_model:
        raise DimensionError(f"query input dim {m.shape[-1]} != {cfg.d_model}")
    out = []
    inv_sqrt_dk = 1.0 / np.sqrt(cfg.d_query)
    for h in range(cfg.n_heads):
        q = matmul(shared.params[f"h{h}.W_q"], m)                       # (d_query,)
        keys = matmul(histories, transpose(shared.params[f"h{h}.W_k"]))  # (J, d_query)
        logits = scale(matmul(keys, q), inv_sqrt_dk)                     # (J,)
        out.append((logits, softmax(logits)))
    return out


def _advise_graph(shared: SharedAttention, m: np.ndarray, packets,
                  head_mask: np.ndarray | None = None):
    """Build the full advise pipeline; returns (actor logits, decoded, heads)."""
    cfg = shared.config
    thetas = np.stack([p.theta for p in packets])  # (J, P)
    if thetas.shape[1] != cfg.param_count:
        raise DimensionError(f"packet theta dim {thetas.shape[1]} != {cfg.param_count}")
    heads = _head_scores(shared, m, packets)
    fused = []
    for h, (logits, weights) in enumerate(heads):
        values = matmul(thetas, transpose(shared.params[f"h{h}.W_v"]))  # (J, d_value)
        head_value = matmul(weights, values)                            # (d_value,)
        if head_mask is not None:
            head_value = scale(head_value, float(head_mask[h]))
        fused.append(head_value)
    decoded = matmul(shared.params["W_t"], concat(fused, axis=-1))      # (P,)
    if decoded.value.size != cfg.param_count:
        raise DimensionError(
            f"decoded parameter vector has {decoded.value.size} entries, expected {cfg.param_count}")
    actor_params = {}
    for name, (lo, hi) in shared._spans.items():
        shape = shared._actor_template[name].value.shape
        actor_params[name] = reshape(slice_axis(decoded, lo, hi, 0), shape)
    action_logits = mlp_forward(cfg.actor_spec, actor_params, m)
    return action_logits, decoded, heads


def draw_head_mask(config: AttentionConfig, rng: np.random.Generator) -> np.ndarray:
    """Head-level dropout mask: zero with prob p, else rescale by 1/(1-p)."""
    if config.dropout <= 0.0:
        return np.ones(config.n_heads)
    keep = rng.random(config.n_heads) >= config.dropout
    return keep.astype(np.float64) / (1.0 - config.dropout)


def attend_weights(shared: SharedAttention, m: np.ndarray, packets) -> list[np.ndarray]:
    """Per-head weight rows over teachers; each row sums to 1."""
    packets = _require_packets(packets)
    return [w.value for _, w in _head_scores(shared, m, packets)]


def attend_logits(shared: SharedAttention, m: np.ndarray, packets) -> list[np.ndarray]:
    packets = _require_packets(packets)
    return [l.value for l, _ in _head_scores(shared, m, packets)]


def advise(shared: SharedAttention, m: np.ndarray, packets, training: bool = False,
           rng: np.random.Generator | None = None, temperature: float = 1.0) -> AdviceResult:
    """Fuse the teachers' policies and produce the advised action.

    Evaluation is deterministic (argmax, no dropout). Training applies head
    dropout and draws the executed action by perturbed argmax at the given
    temperature, matching the self-acting exploration scheme.
    """
    packets = _require_packets(packets)
    mask = None
    if training:
        if rng is None:
            raise ConfigError("training-mode advise needs an rng")
        mask = draw_head_mask(shared.config, rng)
    action_logits, decoded, heads = _advise_graph(shared, m, packets, head_mask=mask)
    logits = action_logits.value
    if training:
        gumbel = -np.log(-np.log(rng.uniform(1e-12, 1.0, size=logits.shape)))
        action = int(np.argmax(logits / max(temperature, 1e-8) + gumbel))
    else:
        action = int(np.argmax(logits))
    return AdviceResult(
        action=action,
        weights=tuple(w.value for _, w in heads),
        logits=tuple(l.value for l, _ in heads),
        decoded=decoded.value,
    )


def ats_objective(shared: SharedAttention, batch: list[AtsItem], temperature: float = 1.0,
                  head_masks: np.ndarray | None = None) -> Var:
    """Batch-mean critic value of the relaxed advised action; the quantity the
    shared parameters ascend."""
    qs = []
    for b, item in enumerate(batch):
        mask = head_masks[b] if head_masks is not None else None
        action_logits, _, _ = _advise_graph(shared, item.m, item.packets, head_mask=mask)
        relaxed = softmax(scale(action_logits, 1.0 / max(temperature, 1e-8)), axis=-1)
        critic_values = {name: p.value for name, p in item.critic.items()}
        q = mlp_forward(item.critic_spec, critic_values, cat([item.m, relaxed], axis=-1))
        qs.append(q)
    return mean_all(concat(qs, axis=0))


def update_ats(shared: SharedAttention, batch: list[AtsItem], temperature: float = 1.0,
               rng: np.random.Generator | None = None, training_dropout: bool = True):
    """One ascent step on the pooled batch. Returns the objective, or None for
    an empty batch (skip signal)."""
    if not batch:
        return None
    masks = None
    if training_dropout and shared.config.dropout > 0.0:
        if rng is None:
            raise ConfigError("dropout at update time needs an rng")
        masks = np.stack([draw_head_mask(shared.config, rng) for _ in batch])
    shared.params.zero_grads()
    objective = ats_objective(shared, batch, temperature, head_masks=masks)
    backward(scale(objective, -1.0))
    adam_step(shared.params, shared.opt)
    return float(objective.value)


def export_shared(shared: SharedAttention, path) -> None:
    out = ParamSet()
    out.add(HEADER_KEY, shared.config.header())
    out.add(ACTOR_WIDTHS_KEY, np.array(shared.config.actor_spec.widths, dtype=np.float64))
    for name, p in shared.params.items():
        out.add(name, p.value.copy())
    save_params(out, path)


def import_shared(path, config: AttentionConfig, lr: float = 1e-3) -> SharedAttention:
    """Load a shared-attention snapshot, validating every recorded dimension
    against the receiving configuration."""
    snapshot = load_params(path)
    if HEADER_KEY not in snapshot or ACTOR_WIDTHS_KEY not in snapshot:
        raise IncompatibleSnapshotError(f"{path}: missing attention header entries")
    stored = snapshot[HEADER_KEY].value
    expected = config.header()
    mismatches = [
        f"{field}: snapshot={stored[i]:g} config={expected[i]:g}"
        for i, field in enumerate(HEADER_FIELDS)
        if stored[i] != expected[i]
    ]
    stored_widths = tuple(int(w) for w in snapshot[ACTOR_WIDTHS_KEY].value)
    if stored_widths != config.actor_spec.widths:
        mismatches.append(f"actor widths: snapshot={stored_widths} config={config.actor_spec.widths}")
    if mismatches:
        raise IncompatibleSnapshotError(
            f"{path}: incompatible attention snapshot ({'; '.join(mismatches)})")
    shared = SharedAttention(config, np.random.default_rng(0), lr=lr)
    for name, p in shared.params.items():
        p.value[...] = snapshot[name].value
    return shared
