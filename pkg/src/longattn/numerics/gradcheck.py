"""Finite-difference gradient verification."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import EvaluationError
from .tensor import Tensor, backward

DEFAULT_EPS = 1e-4


def _scalar(value) -> float:
    if isinstance(value, Tensor):
        value = value.item()
    value = float(value)
    if not np.isfinite(value):
        raise EvaluationError(f"objective evaluated to a non-finite value: {value}")
    return value


def finite_diff_grad(f: Callable[[], object], p: Tensor, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Central-difference gradient of the scalar ``f()`` w.r.t. every entry of ``p``.

    ``f`` must recompute its forward pass from the current contents of ``p``.
    ``p.data`` is restored exactly after each probe.
    """
    if eps <= 0:
        raise EvaluationError(f"finite differences need eps > 0, got {eps}")
    grad = np.zeros_like(p.data)
    it = np.nditer(p.data, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        original = p.data[idx]
        p.data[idx] = original + eps
        hi = _scalar(f())
        p.data[idx] = original - eps
        lo = _scalar(f())
        p.data[idx] = original
        grad[idx] = (hi - lo) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| scaled by the largest gradient magnitude present."""
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-10)
    return float(np.abs(analytic - numeric).max(initial=0.0) / scale)


def check_gradients(
    f: Callable[[], Tensor],
    params: Sequence[tuple[str, Tensor]],
    eps: float = DEFAULT_EPS,
) -> dict[str, float]:
    """Compare tape gradients of ``f()`` against central differences.

    Returns the max relative error per parameter name. Gradient buffers of
    the given parameters are reset before the analytic pass.
    """
    for _, p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    errors: dict[str, float] = {}
    for name, p in params:
        analytic = p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
        numeric = finite_diff_grad(f, p, eps=eps)
        errors[name] = max_relative_error(analytic, numeric)
    return errors
