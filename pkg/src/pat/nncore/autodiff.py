"""Tape-based reverse-mode differentiation over dense float64 arrays.

A forward pass builds a graph of `Var` nodes; `backward` replays it in
reverse topological order and accumulates vector-Jacobian products into each
leaf's `.grad`. Operands that are plain numpy arrays (or Python scalars) are
treated as constants and never receive gradients, which keeps recorded graphs
small on hot paths.

Everything is float64. All shapes follow numpy conventions; vectors are 1-D,
batches are 2-D with the batch along axis 0.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DimensionError, NumericError, UsageError

Array = np.ndarray


def as_array(x, name: str = "tensor") -> Array:
    """Coerce to a float64 ndarray, rejecting non-finite input."""
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{name} contains non-finite values")
    return arr


class Var:
    """One node of a recorded computation: a value plus a gradient slot.

    Leaves (no parents) are either differentiable (parameters and `leaf(...)`
    inputs, marked `track`) or constants; backward skips accumulation into
    untracked leaves entirely.
    """

    __slots__ = ("value", "grad", "parents", "vjp", "name", "track")

    def __init__(self, value: Array, parents: tuple = (), vjp=None, name: str = ""):
        self.value = value
        self.grad: Array | None = None
        self.parents = parents
        self.vjp = vjp
        self.name = name
        self.track = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        tag = self.name or "var"
        return f"Var({tag}, shape={self.value.shape})"


def leaf(value, name: str = "") -> Var:
    """A differentiable leaf with a zero-initialized persistent gradient."""
    v = Var(as_array(value, name or "leaf"), name=name)
    v.grad = np.zeros_like(v.value)
    v.track = True
    return v


def value_of(x) -> Array:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(a, b, out_value: Array, vjp_a, vjp_b, name: str) -> Var:
    parents = []
    slots = []
    if isinstance(a, Var):
        parents.append(a)
        slots.append(0)
    if isinstance(b, Var):
        parents.append(b)
        slots.append(1)
    if not parents:
        raise UsageError(f"{name}: at least one operand must be a Var")

    def vjp(g: Array):
        grads = (vjp_a(g), vjp_b(g))
        return tuple(grads[s] for s in slots)

    return Var(out_value, tuple(parents), vjp, name)


def add(a, b) -> Var:
    av, bv = value_of(a), value_of(b)
    out = av + bv
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g, av.shape),
        lambda g: _unbroadcast(g, bv.shape),
        "add",
    )


def sub(a, b) -> Var:
    av, bv = value_of(a), value_of(b)
    out = av - bv
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g, av.shape),
        lambda g: _unbroadcast(-g, bv.shape),
        "sub",
    )


def mul(a, b) -> Var:
    av, bv = value_of(a), value_of(b)
    out = av * bv
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g * bv, av.shape),
        lambda g: _unbroadcast(g * av, bv.shape),
        "mul",
    )


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return Var(a.value * c, (a,), lambda g: (g * c,), "scale")


def neg(a: Var) -> Var:
    return scale(a, -1.0)


def matmul(a, b) -> Var:
    """Matrix product supporting the 1-D/2-D combinations numpy's `@` allows."""
    av, bv = value_of(a), value_of(b)
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2):
        raise DimensionError(f"matmul expects 1-D or 2-D operands, got {av.ndim}-D @ {bv.ndim}-D")
    if av.shape[-1] != bv.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    out = av @ bv

    if av.ndim == 1 and bv.ndim == 1:  # dot -> scalar
        vjp_a = lambda g: g * bv
        vjp_b = lambda g: g * av
    elif av.ndim == 1:  # (n,) @ (n,m) -> (m,)
        vjp_a = lambda g: bv @ g
        vjp_b = lambda g: np.outer(av, g)
    elif bv.ndim == 1:  # (B,n) @ (n,) -> (B,)
        vjp_a = lambda g: g[:, None] * bv
        vjp_b = lambda g: av.T @ g
    else:  # (B,n) @ (n,m) -> (B,m)
        vjp_a = lambda g: g @ bv.T
        vjp_b = lambda g: av.T @ g

    return _binary(a, b, out, vjp_a, vjp_b, "matmul")


def transpose(a: Var) -> Var:
    if a.value.ndim != 2:
        raise DimensionError("transpose expects a 2-D Var")
    return Var(a.value.T, (a,), lambda g: (g.T,), "transpose")


def tanh(a: Var) -> Var:
    out = np.tanh(a.value)
    return Var(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(a: Var) -> Var:
    out = 1.0 / (1.0 + np.exp(-a.value))
    return Var(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def softmax(a: Var, axis: int = -1) -> Var:
    """Numerically stable softmax (max-subtracted) along `axis`."""
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g: Array):
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner),)

    return Var(out, (a,), vjp, "softmax")


def sum_all(a: Var) -> Var:
    return Var(np.asarray(a.value.sum()), (a,), lambda g: (np.broadcast_to(g, a.value.shape).copy(),), "sum")


def mean_all(a: Var) -> Var:
    n = a.value.size
    return Var(
        np.asarray(a.value.mean()),
        (a,),
        lambda g: (np.broadcast_to(g / n, a.value.shape).copy(),),
        "mean",
    )


def concat(parts: Sequence, axis: int = -1) -> Var:
    values = [value_of(p) for p in parts]
    out = np.concatenate(values, axis=axis)
    var_slots = [i for i, p in enumerate(parts) if isinstance(p, Var)]
    if not var_slots:
        raise UsageError("concat: at least one part must be a Var")
    sizes = [v.shape[axis] for v in values]
    offsets = np.cumsum([0] + sizes)

    def vjp(g: Array):
        pieces = []
        for i in var_slots:
            sl = [slice(None)] * g.ndim
            sl[axis if axis >= 0 else g.ndim + axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(sl)])
        return tuple(pieces)

    return Var(out, tuple(parts[i] for i in var_slots), vjp, "concat")


def cat(parts: Sequence, axis: int = -1):
    """`concat` that degrades to a plain numpy concatenate when every part is
    a constant; use on paths that may or may not be tracked."""
    if any(isinstance(p, Var) for p in parts):
        return concat(parts, axis=axis)
    return np.concatenate([value_of(p) for p in parts], axis=axis)


def slice_axis(a: Var, start: int, stop: int, axis: int = -1) -> Var:
    nd = a.value.ndim
    ax = axis if axis >= 0 else nd + axis
    sl = [slice(None)] * nd
    sl[ax] = slice(start, stop)
    sl = tuple(sl)

    def vjp(g: Array):
        full = np.zeros_like(a.value)
        full[sl] = g
        return (full,)

    return Var(a.value[sl], (a,), vjp, "slice")


def reshape(a: Var, shape: tuple[int, ...]) -> Var:
    orig = a.value.shape
    return Var(a.value.reshape(shape), (a,), lambda g: (g.reshape(orig),), "reshape")


def backward(loss: Var, loss_grad=None) -> None:
    """Accumulate d(loss)/d(leaf) into every differentiable leaf reachable
    from `loss`. The loss must be scalar (or `loss_grad` must supply the
    output adjoint of matching shape)."""
    if not isinstance(loss, Var):
        raise UsageError("backward requires a recorded forward pass (got a constant)")
    if loss_grad is None:
        if loss.value.size != 1:
            raise UsageError(f"backward without loss_grad requires a scalar loss, got shape {loss.value.shape}")
        seed = np.ones_like(loss.value)
    else:
        seed = as_array(loss_grad, "loss_grad")
        if seed.shape != loss.value.shape:
            raise DimensionError(f"loss_grad shape {seed.shape} != loss shape {loss.value.shape}")

    # Reverse topological order via iterative DFS (graphs can be deep for BPTT).
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    adjoint: dict[int, Array] = {id(loss): seed}
    for node in reversed(order):
        g = adjoint.pop(id(node), None)
        if g is None:
            continue
        if node.vjp is None:
            # Accumulate into differentiable leaves; constants are skipped.
            if node.track:
                if node.grad is None:
                    node.grad = np.zeros_like(node.value)
                node.grad += g
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if pg is None:
                continue
            key = id(parent)
            if key in adjoint:
                adjoint[key] = adjoint[key] + pg
            else:
                adjoint[key] = pg
