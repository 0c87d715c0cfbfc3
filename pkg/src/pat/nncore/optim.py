"""Adam optimizer over ParamSets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericError
from .autodiff import Array
from .params import ParamSet


@dataclass
class AdamState:
    """Per-parameter moment estimates plus shared hyperparameters.

    Moments are allocated lazily so one state object can be created before
    its ParamSet and never drifts out of shape (shapes are fixed for life).
    """

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, Array] = field(default_factory=dict)
    v: dict[str, Array] = field(default_factory=dict)


def adam_step(params: ParamSet, opt: AdamState) -> None:
    """One Adam update from the accumulated grads; zeroes grads afterward."""
    opt.t += 1
    bias1 = 1.0 - opt.beta1 ** opt.t
    bias2 = 1.0 - opt.beta2 ** opt.t
    for name, p in params.items():
        g = p.grad
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        if name not in opt.m:
            opt.m[name] = np.zeros_like(p.value)
            opt.v[name] = np.zeros_like(p.value)
        m, v = opt.m[name], opt.v[name]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * (g * g)
        p.value -= opt.lr * (m / bias1) / (np.sqrt(v / bias2) + opt.eps)
    params.zero_grads()


def soft_update(target: ParamSet, online: ParamSet, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, entrywise."""
    for name, p in target.items():
        p.value *= (1.0 - tau)
        p.value += tau * online[name].value
