"""Dense layers: MLP with tanh hidden units and a recurrent LSTM cell.

Both layers run on autodiff `Var` graphs, so their parameters may be ParamSet
entries *or* intermediate nodes (the attention decoder feeds sliced vectors in
as weights). Inputs may be single vectors or batches stacked along axis 0.

LSTM gate layout is fixed: the pre-activation vector of size 4H splits into
blocks [input, forget, cell, output], in that order. Flattened parameter
vectors and snapshot files rely on this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ConfigError, DimensionError
from . import autodiff as ad
from .autodiff import Var
from .params import ParamSet

OUTPUT_ACTIVATIONS = ("identity", "softmax")


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected topology: `widths[0]` inputs through `widths[-1]` outputs."""

    widths: tuple[int, ...]
    out_activation: str = "identity"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ConfigError("MlpSpec needs at least an input and an output width")
        if any(w < 1 for w in self.widths):
            raise ConfigError(f"MlpSpec widths must be positive, got {self.widths}")
        if self.out_activation not in OUTPUT_ACTIVATIONS:
            raise ConfigError(f"unknown output activation {self.out_activation!r}")

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def param_count(self) -> int:
        return sum((i + 1) * o for i, o in zip(self.widths[:-1], self.widths[1:]))

    def layer_names(self) -> list[str]:
        names = []
        for layer in range(len(self.widths) - 1):
            names += [f"l{layer}.W", f"l{layer}.b"]
        return names


def init_mlp_params(spec: MlpSpec, rng: np.random.Generator) -> ParamSet:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases."""
    params = ParamSet()
    for layer, (fan_in, fan_out) in enumerate(zip(spec.widths[:-1], spec.widths[1:])):
        limit = 1.0 / np.sqrt(fan_in)
        params.add(f"l{layer}.W", rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        params.add(f"l{layer}.b", np.zeros(fan_out))
    return params


def _mm(a, b):
    if isinstance(a, Var) or isinstance(b, Var):
        return ad.matmul(a, b)
    return a @ b


def _plus(a, b):
    if isinstance(a, Var) or isinstance(b, Var):
        return ad.add(a, b)
    return a + ad.value_of(b)


def mlp_forward(spec: MlpSpec, params: Mapping, x) -> Var:
    """Run the network. `x` is a vector (in_dim,) or batch (B, in_dim).

    Parameters and input may each be Vars (tracked) or plain arrays
    (constants); an all-constant call stays in plain numpy until the
    final wrap.
    """
    xv = ad.value_of(x)
    if xv.shape[-1] != spec.in_dim:
        raise DimensionError(f"layer l0 expects {spec.in_dim} inputs, got {xv.shape[-1]}")
    h = x if isinstance(x, Var) else xv
    n_layers = len(spec.widths) - 1
    for layer in range(n_layers):
        W = params[f"l{layer}.W"]
        b = params[f"l{layer}.b"]
        Wv = ad.value_of(W)
        if Wv.shape[1] != ad.value_of(h).shape[-1]:
            raise DimensionError(
                f"layer l{layer} expects {Wv.shape[1]} inputs, got {ad.value_of(h).shape[-1]}")
        if ad.value_of(h).ndim == 1:
            z = _mm(W, h)
        else:
            Wt = ad.transpose(W) if isinstance(W, Var) else Wv.T
            z = _mm(h, Wt)
        h = _plus(z, b)
        if layer < n_layers - 1:
            h = ad.tanh(h) if isinstance(h, Var) else np.tanh(h)
    if spec.out_activation == "softmax":
        h = ad.softmax(_as_var(h), axis=-1)
    elif not isinstance(h, Var):
        h = Var(np.asarray(h, dtype=np.float64))
    return h


@dataclass(frozen=True)
class LstmCellSpec:
    input_dim: int
    hidden_dim: int

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("LstmCellSpec dims must be positive")

    def param_count(self) -> int:
        h, d = self.hidden_dim, self.input_dim
        return 4 * h * (d + h + 1)


def init_lstm_params(spec: LstmCellSpec, rng: np.random.Generator) -> ParamSet:
    h, d = spec.hidden_dim, spec.input_dim
    limit = 1.0 / np.sqrt(d + h)
    params = ParamSet()
    params.add("W_x", rng.uniform(-limit, limit, size=(4 * h, d)))
    params.add("W_h", rng.uniform(-limit, limit, size=(4 * h, h)))
    params.add("b", np.zeros(4 * h))
    return params


def lstm_step(spec: LstmCellSpec, params: Mapping, x, state) -> tuple[Var, Var]:
    """One cell update. Returns (h', c'); shapes follow the input convention
    ((H,) for a single step, (B, H) for a batch)."""
    h_prev, c_prev = state
    H = spec.hidden_dim
    xv, hv = ad.value_of(x), ad.value_of(h_prev)
    if xv.shape[-1] != spec.input_dim:
        raise DimensionError(f"lstm input dim {xv.shape[-1]} != {spec.input_dim}")
    if hv.shape[-1] != H or ad.value_of(c_prev).shape[-1] != H:
        raise DimensionError(f"lstm state dim != {H}")

    W_x, W_h, b = params["W_x"], params["W_h"], params["b"]
    if xv.ndim == 1:
        gates = ad.add(ad.add(ad.matmul(W_x, _as_var(x)), ad.matmul(W_h, _as_var(h_prev))), b)
    else:
        Wx_t = ad.transpose(W_x) if isinstance(W_x, Var) else ad.value_of(W_x).T
        Wh_t = ad.transpose(W_h) if isinstance(W_h, Var) else ad.value_of(W_h).T
        gates = ad.add(ad.add(ad.matmul(_as_var(x), Wx_t), ad.matmul(_as_var(h_prev), Wh_t)), b)

    i = ad.sigmoid(ad.slice_axis(gates, 0, H))
    f = ad.sigmoid(ad.slice_axis(gates, H, 2 * H))
    g = ad.tanh(ad.slice_axis(gates, 2 * H, 3 * H))
    o = ad.sigmoid(ad.slice_axis(gates, 3 * H, 4 * H))

    c_new = ad.add(ad.mul(f, _as_var(c_prev)), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def _as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(np.asarray(x, dtype=np.float64))
