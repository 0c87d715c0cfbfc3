import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pat.errors import ConfigError, DimensionError
from pat.nncore import (
    LstmCellSpec,
    MlpSpec,
    ParamSet,
    backward,
    init_lstm_params,
    init_mlp_params,
    lstm_step,
    mlp_forward,
    sum_all,
)

from .fdcheck import assert_grads_match, fd_gradient


def zero_like(params: ParamSet) -> ParamSet:
    out = ParamSet()
    for name, p in params.items():
        out.add(name, np.zeros_like(p.value))
    return out


def test_zero_network_outputs_zero():
    spec = MlpSpec((3, 8, 4))
    params = zero_like(init_mlp_params(spec, np.random.default_rng(0)))
    y = mlp_forward(spec, params, np.array([0.5, -1.0, 2.0]))
    assert np.array_equal(y.value, np.zeros(4))


def test_single_identity_layer_passes_zero_through():
    spec = MlpSpec((2, 2))
    params = ParamSet()
    params.add("l0.W", np.eye(2))
    params.add("l0.b", np.zeros(2))
    y = mlp_forward(spec, params, np.zeros(2))
    assert np.array_equal(y.value, np.zeros(2))


def test_random_three_layer_net_matches_straight_line_oracle():
    rng = np.random.default_rng(42)
    spec = MlpSpec((4, 6, 5, 3))
    params = init_mlp_params(spec, rng)
    x = rng.normal(size=4)

    # Independent straight-line computation of the same topology.
    h = x
    for layer in range(2):
        h = np.tanh(params[f"l{layer}.W"].value @ h + params[f"l{layer}.b"].value)
    expected = params["l2.W"].value @ h + params["l2.b"].value

    got = mlp_forward(spec, params, x).value
    assert np.max(np.abs(got - expected)) < 1e-12


def test_batched_forward_matches_per_row_forward():
    rng = np.random.default_rng(3)
    spec = MlpSpec((4, 7, 2))
    params = init_mlp_params(spec, rng)
    xs = rng.normal(size=(6, 4))
    batched = mlp_forward(spec, params, xs).value
    rows = np.stack([mlp_forward(spec, params, x).value for x in xs])
    assert np.max(np.abs(batched - rows)) < 1e-12


def test_softmax_output_head_is_distribution():
    rng = np.random.default_rng(4)
    spec = MlpSpec((3, 6, 4), out_activation="softmax")
    params = init_mlp_params(spec, rng)
    y = mlp_forward(spec, params, rng.normal(size=3)).value
    assert np.all(y >= 0)
    assert abs(y.sum() - 1.0) < 1e-12


def test_mlp_shape_mismatch_names_layer():
    spec = MlpSpec((3, 5, 2))
    params = init_mlp_params(spec, np.random.default_rng(0))
    with pytest.raises(DimensionError, match="l0"):
        mlp_forward(spec, params, np.ones(4))


def test_mlp_spec_validation():
    with pytest.raises(ConfigError):
        MlpSpec((3,))
    with pytest.raises(ConfigError):
        MlpSpec((3, 0))
    with pytest.raises(ConfigError):
        MlpSpec((3, 2), out_activation="relu")


def test_mlp_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    spec = MlpSpec((3, 5, 2))
    params = init_mlp_params(spec, rng)
    x = rng.normal(size=3)

    def forward():
        return sum_all(mlp_forward(spec, params, x))

    backward(forward())
    numeric = fd_gradient(lambda: forward().value, params)
    assert_grads_match(params, numeric)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=1, max_value=12), st.integers(min_value=1, max_value=12))
def test_lstm_parameter_count_formula(input_dim, hidden_dim):
    spec = LstmCellSpec(input_dim, hidden_dim)
    params = init_lstm_params(spec, np.random.default_rng(0))
    total = sum(p.value.size for p in params.values())
    assert total == 4 * hidden_dim * (input_dim + hidden_dim + 1)
    assert total == spec.param_count()


def test_zero_lstm_emits_zero_hidden_state():
    spec = LstmCellSpec(3, 4)
    params = zero_like(init_lstm_params(spec, np.random.default_rng(0)))
    h, c = lstm_step(spec, params, np.array([1.0, -2.0, 0.5]), (np.zeros(4), np.zeros(4)))
    assert np.array_equal(h.value, np.zeros(4))
    assert np.array_equal(c.value, np.zeros(4))


def _oracle_lstm_step(params, x, h_prev, c_prev, hidden):
    """Gate-by-gate reference with explicit [input, forget, cell, output] order."""

    def sig(z):
        return 1.0 / (1.0 + np.exp(-z))

    pre = params["W_x"].value @ x + params["W_h"].value @ h_prev + params["b"].value
    i = sig(pre[0:hidden])
    f = sig(pre[hidden:2 * hidden])
    g = np.tanh(pre[2 * hidden:3 * hidden])
    o = sig(pre[3 * hidden:4 * hidden])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return h, c


def test_lstm_sequence_matches_gate_by_gate_oracle():
    rng = np.random.default_rng(11)
    spec = LstmCellSpec(3, 5)
    params = init_lstm_params(spec, rng)
    # Random biases as well, so no gate sits at its symmetric point.
    params["b"].value[...] = rng.normal(size=20) * 0.3

    xs = [rng.normal(size=3) for _ in range(3)]
    h = c = np.zeros(5)
    h_ref = c_ref = np.zeros(5)
    for x in xs:
        hv, cv = lstm_step(spec, params, x, (h, c))
        h, c = hv.value, cv.value
        h_ref, c_ref = _oracle_lstm_step(params, x, h_ref, c_ref, 5)
    assert np.max(np.abs(h - h_ref)) < 1e-12
    assert np.max(np.abs(c - c_ref)) < 1e-12


def test_lstm_is_deterministic():
    rng = np.random.default_rng(12)
    spec = LstmCellSpec(2, 3)
    params = init_lstm_params(spec, rng)
    x = rng.normal(size=2)

    def run():
        h, c = np.zeros(3), np.zeros(3)
        for _ in range(4):
            hv, cv = lstm_step(spec, params, x, (h, c))
            h, c = hv.value, cv.value
        return h, c

    h1, c1 = run()
    h2, c2 = run()
    assert np.array_equal(h1, h2)
    assert np.array_equal(c1, c2)


def test_lstm_gates_stay_in_range():
    rng = np.random.default_rng(13)
    spec = LstmCellSpec(4, 6)
    params = init_lstm_params(spec, rng)
    h, c = np.zeros(6), np.zeros(6)
    for _ in range(20):
        hv, cv = lstm_step(spec, params, rng.normal(size=4) * 3, (h, c))
        h, c = hv.value, cv.value
        assert np.all(np.isfinite(h)) and np.all(np.isfinite(c))
        assert np.all(np.abs(h) <= 1.0)  # |h| = |o * tanh(c)| <= 1


def test_lstm_shape_mismatch_raises():
    spec = LstmCellSpec(3, 4)
    params = init_lstm_params(spec, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        lstm_step(spec, params, np.ones(5), (np.zeros(4), np.zeros(4)))
    with pytest.raises(DimensionError):
        lstm_step(spec, params, np.ones(3), (np.zeros(2), np.zeros(4)))


def test_lstm_gradients_match_finite_differences():
    rng = np.random.default_rng(14)
    spec = LstmCellSpec(3, 4)
    params = init_lstm_params(spec, rng)
    xs = [rng.normal(size=3) for _ in range(3)]

    def forward():
        h, c = np.zeros(4), np.zeros(4)
        for x in xs:
            h, c = lstm_step(spec, params, x, (h, c))
        return sum_all(h)

    backward(forward())
    numeric = fd_gradient(lambda: forward().value, params)
    assert_grads_match(params, numeric)


def test_batched_lstm_matches_single_rows():
    rng = np.random.default_rng(15)
    spec = LstmCellSpec(3, 4)
    params = init_lstm_params(spec, rng)
    xs = rng.normal(size=(5, 3))
    h0 = rng.normal(size=(5, 4)) * 0.1
    c0 = rng.normal(size=(5, 4)) * 0.1
    hb, cb = lstm_step(spec, params, xs, (h0, c0))
    for row in range(5):
        hr, cr = lstm_step(spec, params, xs[row], (h0[row], c0[row]))
        assert np.max(np.abs(hb.value[row] - hr.value)) < 1e-12
        assert np.max(np.abs(cb.value[row] - cr.value)) < 1e-12
