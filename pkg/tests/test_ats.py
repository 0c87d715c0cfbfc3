import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pat.ats import (
    AtsItem,
    AttentionConfig,
    SharedAttention,
    TeacherPacket,
    advise,
    ats_objective,
    attend_logits,
    attend_weights,
    export_shared,
    import_shared,
    update_ats,
)
from pat.errors import AdviceUnavailableError, IncompatibleSnapshotError
from pat.nncore import MlpSpec, ParamSet, backward, content_hash

from .fdcheck import assert_grads_match, fd_gradient


def make_config(d_model=4, n_heads=2, d_query=3, d_value=5, dropout=0.0,
                actor_widths=None) -> AttentionConfig:
    actor_widths = actor_widths or (d_model, 5)
    return AttentionConfig(
        d_model=d_model, d_history=2 * d_model, d_query=d_query, d_value=d_value,
        n_heads=n_heads, dropout=dropout, actor_spec=MlpSpec(tuple(actor_widths)),
    )


def make_packets(config: AttentionConfig, count: int, seed: int = 0) -> list[TeacherPacket]:
    rng = np.random.default_rng(seed)
    return [
        TeacherPacket(teacher_id=j,
                      history=rng.normal(size=config.d_history),
                      theta=rng.normal(size=config.param_count))
        for j in range(count)
    ]


def action_preferring_critic(config: AttentionConfig, action: int) -> tuple[MlpSpec, ParamSet]:
    """Linear critic whose value is exactly the probability of `action`."""
    n_actions = config.actor_spec.out_dim
    spec = MlpSpec((config.d_model + n_actions, 1))
    params = ParamSet()
    W = np.zeros((1, config.d_model + n_actions))
    W[0, config.d_model + action] = 1.0
    params.add("l0.W", W)
    params.add("l0.b", np.zeros(1))
    return spec, params


# ----- weights -------------------------------------------------------------


def test_single_teacher_gets_weight_one_exactly():
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(0))
    m = np.random.default_rng(1).normal(size=config.d_model)
    for row in attend_weights(shared, m, make_packets(config, 1)):
        assert np.array_equal(row, np.array([1.0]))


def test_identical_histories_share_weight_equally():
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(0))
    rng = np.random.default_rng(2)
    h = rng.normal(size=config.d_history)
    packets = [TeacherPacket(0, h, rng.normal(size=config.param_count)),
               TeacherPacket(1, h.copy(), rng.normal(size=config.param_count))]
    for row in attend_weights(shared, rng.normal(size=config.d_model), packets):
        assert np.max(np.abs(row - 0.5)) < 1e-12


def test_three_teachers_match_straight_line_oracle():
    config = make_config(n_heads=3)
    shared = SharedAttention(config, np.random.default_rng(3))
    rng = np.random.default_rng(4)
    packets = make_packets(config, 3, seed=5)
    m = rng.normal(size=config.d_model)

    rows = attend_weights(shared, m, packets)
    logit_rows = attend_logits(shared, m, packets)
    histories = np.stack([p.history for p in packets])
    for h in range(config.n_heads):
        q = shared.params[f"h{h}.W_q"].value @ m
        keys = histories @ shared.params[f"h{h}.W_k"].value.T
        logits = keys @ q / np.sqrt(config.d_query)
        expected = np.exp(logits - logits.max())
        expected /= expected.sum()
        assert np.max(np.abs(logit_rows[h] - logits)) < 1e-12
        assert np.max(np.abs(rows[h] - expected)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=7), st.integers(min_value=0, max_value=10_000))
def test_weight_rows_are_distributions(n_teachers, seed):
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(seed))
    packets = make_packets(config, n_teachers, seed=seed + 1)
    m = np.random.default_rng(seed + 2).normal(size=config.d_model)
    for row in attend_weights(shared, m, packets):
        assert np.all(row >= 0)
        assert abs(row.sum() - 1.0) < 1e-12


def test_key_scaling_rescales_logits_before_softmax():
    # Multiplying every key input by c must scale logits by exactly c.
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(6))
    packets = make_packets(config, 4, seed=7)
    m = np.random.default_rng(8).normal(size=config.d_model)
    c = 3.5
    scaled = [TeacherPacket(p.teacher_id, p.history * c, p.theta) for p in packets]
    base = attend_logits(shared, m, packets)
    boosted = attend_logits(shared, m, scaled)
    for a, b in zip(base, boosted):
        assert np.max(np.abs(b - c * a)) < 1e-10


def test_zero_packets_is_an_advice_unavailable_error():
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(0))
    with pytest.raises(AdviceUnavailableError):
        attend_weights(shared, np.zeros(config.d_model), [])
    with pytest.raises(AdviceUnavailableError):
        advise(shared, np.zeros(config.d_model), [])


# ----- advise ----------------------------------------------------------------


def pass_through_shared(config: AttentionConfig) -> SharedAttention:
    """H=1, d_value=P, W_v = W_t = identity: decoded == weighted theta sum."""
    shared = SharedAttention(config, np.random.default_rng(0))
    P = config.param_count
    shared.params["h0.W_v"].value[...] = np.eye(P)
    shared.params["W_t"].value[...] = np.eye(P)
    return shared


def test_pass_through_configuration_reproduces_the_teacher():
    d_model, n_actions = 3, 4
    actor_spec = MlpSpec((d_model, n_actions))
    config = AttentionConfig(d_model=d_model, d_history=6, d_query=2,
                             d_value=actor_spec.param_count(), n_heads=1,
                             dropout=0.0, actor_spec=actor_spec)
    shared = pass_through_shared(config)
    rng = np.random.default_rng(9)
    theta = rng.normal(size=config.param_count)
    packet = TeacherPacket(0, rng.normal(size=6), theta)
    m = rng.normal(size=d_model)

    result = advise(shared, m, [packet])
    assert np.array_equal(result.decoded, theta)
    # The advised action is the teacher's own greedy action at m.
    W = theta[:n_actions * d_model].reshape(n_actions, d_model)
    b = theta[n_actions * d_model:]
    assert result.action == int(np.argmax(W @ m + b))


def test_permuting_teachers_permutes_weights_and_preserves_advice():
    config = make_config(n_heads=2)
    shared = SharedAttention(config, np.random.default_rng(10))
    packets = make_packets(config, 4, seed=11)
    m = np.random.default_rng(12).normal(size=config.d_model)
    base = advise(shared, m, packets)

    perm = [2, 0, 3, 1]
    permuted = advise(shared, m, [packets[i] for i in perm])
    for h in range(config.n_heads):
        assert np.max(np.abs(permuted.weights[h] - base.weights[h][perm])) < 1e-12
    assert np.max(np.abs(permuted.decoded - base.decoded)) < 1e-10
    assert permuted.action == base.action


def test_advise_matches_independent_end_to_end_oracle():
    config = make_config(d_model=3, n_heads=2, d_query=4, d_value=6,
                         actor_widths=(3, 5))
    shared = SharedAttention(config, np.random.default_rng(13))
    packets = make_packets(config, 2, seed=14)
    m = np.random.default_rng(15).normal(size=3)
    result = advise(shared, m, packets)

    # Straight-line re-implementation: weights, per-head fusion, decode,
    # unflatten into (W, b), run the linear actor.
    histories = np.stack([p.history for p in packets])
    thetas = np.stack([p.theta for p in packets])
    fused = []
    for h in range(config.n_heads):
        q = shared.params[f"h{h}.W_q"].value @ m
        logits = histories @ shared.params[f"h{h}.W_k"].value.T @ q / np.sqrt(config.d_query)
        alpha = np.exp(logits - logits.max())
        alpha /= alpha.sum()
        values = thetas @ shared.params[f"h{h}.W_v"].value.T
        fused.append(alpha @ values)
    decoded = shared.params["W_t"].value @ np.concatenate(fused)
    n_actions, d = 5, 3
    W = decoded[:n_actions * d].reshape(n_actions, d)
    b = decoded[n_actions * d:]
    assert np.max(np.abs(result.decoded - decoded)) < 1e-10
    assert result.action == int(np.argmax(W @ m + b))


def test_advise_without_dropout_is_deterministic():
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(16))
    packets = make_packets(config, 3, seed=17)
    m = np.random.default_rng(18).normal(size=config.d_model)
    a = advise(shared, m, packets)
    b = advise(shared, m, packets)
    assert a.action == b.action
    assert np.array_equal(a.decoded, b.decoded)


def test_dropout_masks_zero_whole_heads_during_training():
    config = make_config(n_heads=4, dropout=0.9)
    shared = SharedAttention(config, np.random.default_rng(19))
    packets = make_packets(config, 3, seed=20)
    m = np.random.default_rng(21).normal(size=config.d_model)
    rng = np.random.default_rng(22)
    dropped = advise(shared, m, packets, training=True, rng=rng)
    assert np.all(np.isfinite(dropped.decoded))
    # With p=0.9 on 4 heads, almost surely some head was zeroed, altering output.
    plain = advise(shared, m, packets)
    assert not np.array_equal(dropped.decoded, plain.decoded)


def test_parameter_shapes_are_independent_of_team_size():
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(23))
    shapes = {name: p.value.shape for name, p in shared.params.items()}
    m = np.zeros(config.d_model)
    for count in (1, 3, 7):
        rows = attend_weights(shared, m, make_packets(config, count, seed=count))
        assert all(row.shape == (count,) for row in rows)
    assert shapes == {name: p.value.shape for name, p in shared.params.items()}


# ----- update ----------------------------------------------------------------


def drill_setup(seed=24):
    """Pass-through selector, two teachers with opposite greedy actions, and a
    critic that pays exactly the probability of action 0."""
    d_model, n_actions = 3, 5
    actor_spec = MlpSpec((d_model, n_actions))
    config = AttentionConfig(d_model=d_model, d_history=6, d_query=4,
                             d_value=actor_spec.param_count(), n_heads=1,
                             dropout=0.0, actor_spec=actor_spec)
    shared = pass_through_shared(config)
    rng = np.random.default_rng(seed)

    def teacher(tid, favored):
        theta = np.zeros(config.param_count)
        theta[n_actions * d_model + favored] = 5.0  # bias toward one action
        return TeacherPacket(tid, rng.normal(size=6), theta)

    packets = (teacher(0, favored=0), teacher(1, favored=1))
    critic_spec, critic = action_preferring_critic(config, action=0)
    m = rng.normal(size=d_model)
    batch = [AtsItem(m=m, packets=packets, executed_action=0,
                     critic_spec=critic_spec, critic=critic)]
    return shared, batch, m, packets


def test_update_gradients_match_finite_differences():
    config = make_config(d_model=3, n_heads=2, d_query=3, d_value=4,
                         actor_widths=(3, 6, 5), dropout=0.5)
    shared = SharedAttention(config, np.random.default_rng(25))
    rng = np.random.default_rng(26)
    critic_spec, critic = action_preferring_critic(config, action=1)
    batch = []
    for _ in range(3):
        batch.append(AtsItem(m=rng.normal(size=3), packets=tuple(make_packets(config, 3, seed=27)),
                             executed_action=0, critic_spec=critic_spec, critic=critic))
    masks = np.stack([[1 / (1 - 0.5), 0.0], [0.0, 1 / (1 - 0.5)], [1 / (1 - 0.5), 1 / (1 - 0.5)]])

    def objective():
        return ats_objective(shared, batch, temperature=0.7, head_masks=masks).value

    shared.params.zero_grads()
    backward(ats_objective(shared, batch, temperature=0.7, head_masks=masks))
    numeric = fd_gradient(objective, shared.params)
    assert_grads_match(shared.params, numeric)


def test_helpful_teacher_gains_attention_weight():
    shared, batch, m, packets = drill_setup()
    start = attend_weights(shared, m, packets)[0][0]
    for _ in range(200):
        update_ats(shared, batch, temperature=1.0)
    end = attend_weights(shared, m, packets)[0][0]
    assert end > start
    assert end > 0.6


def test_zero_learning_rate_keeps_parameters_bit_identical():
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(28), lr=0.0)
    critic_spec, critic = action_preferring_critic(config, action=0)
    batch = [AtsItem(m=np.zeros(config.d_model), packets=tuple(make_packets(config, 2, seed=29)),
                     executed_action=0, critic_spec=critic_spec, critic=critic)]
    before = content_hash(shared.params)
    update_ats(shared, batch)
    assert content_hash(shared.params) == before


def test_empty_batch_signals_skip():
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(30))
    assert update_ats(shared, []) is None


# ----- transfer snapshot ------------------------------------------------------


def test_export_import_round_trip_is_bit_exact(tmp_path):
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(31))
    path = tmp_path / "shared.params"
    export_shared(shared, path)
    loaded = import_shared(path, config)
    assert content_hash(loaded.params) == content_hash(shared.params)


def test_import_into_larger_team_yields_longer_weight_rows(tmp_path):
    config = make_config()
    shared = SharedAttention(config, np.random.default_rng(32))
    path = tmp_path / "shared.params"
    export_shared(shared, path)
    loaded = import_shared(path, config)
    rows = attend_weights(loaded, np.zeros(config.d_model), make_packets(config, 7, seed=33))
    assert all(row.shape == (7,) for row in rows)


def test_import_with_mismatched_dims_is_an_incompatibility_error(tmp_path):
    config = make_config(d_model=4)
    shared = SharedAttention(config, np.random.default_rng(34))
    path = tmp_path / "shared.params"
    export_shared(shared, path)

    other = AttentionConfig(d_model=6, d_history=12, d_query=config.d_query,
                            d_value=config.d_value, n_heads=config.n_heads,
                            dropout=config.dropout, actor_spec=MlpSpec((6, 5)))
    with pytest.raises(IncompatibleSnapshotError, match="d_model"):
        import_shared(path, other)


def test_identity_value_init_starts_from_parameter_average():
    d_model, n_actions = 3, 4
    actor_spec = MlpSpec((d_model, n_actions))
    P = actor_spec.param_count()
    config = AttentionConfig(d_model=d_model, d_history=6, d_query=4, d_value=P,
                             n_heads=2, dropout=0.0, actor_spec=actor_spec,
                             identity_value_init=True)
    shared = SharedAttention(config, np.random.default_rng(40))
    rng = np.random.default_rng(41)
    h = rng.normal(size=6)
    packets = [TeacherPacket(0, h, rng.normal(size=P)),
               TeacherPacket(1, h.copy(), rng.normal(size=P))]
    result = advise(shared, rng.normal(size=d_model), packets)
    # Identical histories -> exact average; identity init keeps it within the
    # small perturbation band.
    average = 0.5 * (packets[0].theta + packets[1].theta)
    assert np.max(np.abs(result.decoded - average)) < 0.2


def test_identity_value_init_requires_full_width_values():
    from pat.errors import ConfigError

    actor_spec = MlpSpec((3, 4))
    with pytest.raises(ConfigError):
        AttentionConfig(d_model=3, d_history=6, d_query=4, d_value=8,
                        n_heads=1, dropout=0.0, actor_spec=actor_spec,
                        identity_value_init=True)
