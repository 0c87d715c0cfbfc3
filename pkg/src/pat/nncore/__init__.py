"""Dense-tensor core: autodiff, layers, optimizer, parameter I/O."""

from .autodiff import (
    cat,
    Array,
    Var,
    add,
    as_array,
    backward,
    concat,
    leaf,
    matmul,
    mean_all,
    mul,
    neg,
    reshape,
    scale,
    sigmoid,
    slice_axis,
    softmax,
    sub,
    sum_all,
    tanh,
    transpose,
    value_of,
)
from .layers import LstmCellSpec, MlpSpec, init_lstm_params, init_mlp_params, lstm_step, mlp_forward
from .optim import AdamState, adam_step, soft_update
from .params import (
    FORMAT_VERSION,
    Param,
    ParamSet,
    content_hash,
    flatten_params,
    load_params,
    param_spans,
    save_params,
    unflatten_params,
)

__all__ = [
    "Array", "Var", "add", "as_array", "backward", "cat", "concat", "leaf", "matmul",
    "mean_all", "mul", "neg", "reshape", "scale", "sigmoid", "slice_axis",
    "softmax", "sub", "sum_all", "tanh", "transpose", "value_of",
    "LstmCellSpec", "MlpSpec", "init_lstm_params", "init_mlp_params",
    "lstm_step", "mlp_forward",
    "AdamState", "adam_step", "soft_update",
    "FORMAT_VERSION", "Param", "ParamSet", "content_hash", "flatten_params",
    "load_params", "param_spans", "save_params", "unflatten_params",
]
