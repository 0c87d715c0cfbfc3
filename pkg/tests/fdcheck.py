"""Central finite-difference gradient oracle shared by gradient tests.

The oracle only re-evaluates a scalar objective at perturbed parameter values;
it never touches the reverse-mode machinery it is checking.
"""

from __future__ import annotations

import numpy as np

from pat.nncore import ParamSet

STEP = 1e-5
REL_TOL = 1e-4
ABS_TOL = 1e-7


def fd_gradient(objective, params: ParamSet, names=None, h: float = STEP) -> dict[str, np.ndarray]:
    """Numerical d(objective)/d(param) for every component via central differences.

    `objective` is a zero-argument callable that recomputes the scalar from the
    params' *current* values.
    """
    out = {}
    for name, p in params.items():
        if names is not None and name not in names:
            continue
        grad = np.zeros_like(p.value)
        flat_value = p.value.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat_value.size):
            orig = flat_value[i]
            flat_value[i] = orig + h
            f_plus = float(objective())
            flat_value[i] = orig - h
            f_minus = float(objective())
            flat_value[i] = orig
            flat_grad[i] = (f_plus - f_minus) / (2.0 * h)
        out[name] = grad
    return out


def assert_grads_match(params: ParamSet, numeric: dict[str, np.ndarray],
                       rel_tol: float = REL_TOL, abs_tol: float = ABS_TOL) -> None:
    """Per-component agreement: |a - n| <= max(abs_tol, rel_tol * max(|a|, |n|))."""
    for name, fd in numeric.items():
        analytic = params[name].grad
        diff = np.abs(analytic - fd)
        bound = np.maximum(abs_tol, rel_tol * np.maximum(np.abs(analytic), np.abs(fd)))
        bad = diff > bound
        assert not bad.any(), (
            f"gradient mismatch for {name}: worst component "
            f"analytic={analytic[bad].flat[0]:.6e} fd={fd[bad].flat[0]:.6e}"
        )
