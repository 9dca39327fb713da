"""Tape-based reverse-mode autodiff over dense 2-D float64 arrays.

Every value is a matrix; vectors are 1xN or Nx1 matrices and scalars are
1x1 matrices. Operations never broadcast: shape combinations are explicit
per operation and mismatches raise ``DimensionError``. Each op records an
exact analytic backward on a tape; ``backward(loss)`` accumulates (sums)
gradients into every reachable tensor with ``requires_grad``.

All functions are pure and reentrant on disjoint tensors. The only shared
state is the optional allocation meter used by the memory-footprint tool,
which is not thread-safe while active.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np

from ..errors import DimensionError, StateError

_meter: "AllocationMeter | None" = None


class AllocationMeter:
    """Counts float64 elements newly allocated for tensor data."""

    def __init__(self) -> None:
        self.elements = 0


@contextmanager
def count_allocations() -> Iterator[AllocationMeter]:
    """Count tensor-data allocations made inside the block. Not thread-safe."""
    global _meter
    previous = _meter
    _meter = meter = AllocationMeter()
    try:
        yield meter
    finally:
        _meter = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(
        self,
        data: np.ndarray,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        grad_fn: Callable[[np.ndarray], None] | None = None,
        allocates: bool = True,
    ):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D matrices, got shape {arr.shape}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = parents
        self._grad_fn = grad_fn
        if allocates and _meter is not None:
            _meter.elements += arr.size

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    def zero_grad(self) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        else:
            self.grad.fill(0.0)

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise DimensionError(f"item() needs a 1x1 tensor, got {self.data.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def const(data) -> Tensor:
    """Tensor that does not participate in differentiation."""
    return Tensor(np.asarray(data, dtype=np.float64))


def param(data) -> Tensor:
    """Trainable tensor; gradient buffer starts at exactly zero."""
    t = Tensor(np.array(data, dtype=np.float64), requires_grad=True)
    t.zero_grad()
    return t


def make_op(
    data: np.ndarray,
    parents: Sequence[Tensor],
    grad_fn: Callable[[np.ndarray], None],
    allocates: bool = True,
) -> Tensor:
    """Record one differentiable operation on the tape.

    ``grad_fn`` receives the upstream gradient and must accumulate into the
    parents via ``accumulate_grad``. The graph is pruned below constants.
    """
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=tuple(parents),
                      grad_fn=grad_fn, allocates=allocates)
    return Tensor(data, allocates=allocates)


def accumulate_grad(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into every reachable requires_grad tensor."""
    if loss.data.shape != (1, 1):
        raise DimensionError(f"backward needs a 1x1 loss, got {loss.data.shape}")
    if loss._grad_fn is None and not loss._parents:
        raise StateError("backward called before any forward computation was recorded")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    accumulate_grad(loss, np.ones((1, 1)))
    for node in reversed(topo):
        if node._grad_fn is not None and node.grad is not None:
            node._grad_fn(node.grad)


def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise DimensionError(f"{op}: shapes differ: {a.data.shape} vs {b.data.shape}")


# ---------------------------------------------------------------------------
# elementwise and scalar ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u)
        accumulate_grad(b, u)

    return make_op(a.data + b.data, (a, b), grad_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "sub")

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u)
        accumulate_grad(b, -u)

    return make_op(a.data - b.data, (a, b), grad_fn)


def neg(a: Tensor) -> Tensor:
    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, -u)

    return make_op(-a.data, (a,), grad_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "mul")

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u * b.data)
        accumulate_grad(b, u * a.data)

    return make_op(a.data * b.data, (a, b), grad_fn)


def add_scalar(a: Tensor, c: float) -> Tensor:
    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u)

    return make_op(a.data + c, (a,), grad_fn)


def mul_scalar(a: Tensor, c: float) -> Tensor:
    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u * c)

    return make_op(a.data * c, (a,), grad_fn)


def mul_scalar_tensor(m: Tensor, s: Tensor) -> Tensor:
    """Multiply every entry of ``m`` by the 1x1 tensor ``s``."""
    if s.data.shape != (1, 1):
        raise DimensionError(f"mul_scalar_tensor: scalar must be 1x1, got {s.data.shape}")

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(m, u * s.data[0, 0])
        accumulate_grad(s, np.array([[np.sum(u * m.data)]]))

    return make_op(m.data * s.data[0, 0], (m, s), grad_fn)


def pow_scalar(a: Tensor, p: float) -> Tensor:
    out = a.data**p

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u * p * a.data ** (p - 1.0))

    return make_op(out, (a,), grad_fn)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u * out)

    return make_op(out, (a,), grad_fn)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u * mask)

    return make_op(np.maximum(a.data, 0.0), (a,), grad_fn)


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(
            f"matmul: inner dimensions differ: {a.data.shape} x {b.data.shape}"
        )

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u @ b.data.T)
        accumulate_grad(b, a.data.T @ u)

    return make_op(a.data @ b.data, (a, b), grad_fn)


def transpose(a: Tensor) -> Tensor:
    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, u.T)

    return make_op(a.data.T, (a,), grad_fn, allocates=False)


def sum_all(a: Tensor) -> Tensor:
    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, np.full_like(a.data, u[0, 0]))

    return make_op(np.array([[a.data.sum()]]), (a,), grad_fn)


def row_sums(a: Tensor) -> Tensor:
    """Sum across columns: (L, C) -> (L, 1)."""

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, np.repeat(u, a.data.shape[1], axis=1))

    return make_op(a.data.sum(axis=1, keepdims=True), (a,), grad_fn)


def col_sums(a: Tensor) -> Tensor:
    """Sum across rows: (L, C) -> (1, C)."""

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(a, np.repeat(u, a.data.shape[0], axis=0))

    return make_op(a.data.sum(axis=0, keepdims=True), (a,), grad_fn)


def tile_rows(v: Tensor, n: int) -> Tensor:
    """Stack ``n`` copies of the 1xC row vector ``v``."""
    if v.data.shape[0] != 1:
        raise DimensionError(f"tile_rows: expected 1xC row vector, got {v.data.shape}")

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(v, u.sum(axis=0, keepdims=True))

    return make_op(np.repeat(v.data, n, axis=0), (v,), grad_fn)


def tile_cols(v: Tensor, n: int) -> Tensor:
    """Stack ``n`` copies of the Lx1 column vector ``v`` side by side."""
    if v.data.shape[1] != 1:
        raise DimensionError(f"tile_cols: expected Lx1 column vector, got {v.data.shape}")

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(v, u.sum(axis=1, keepdims=True))

    return make_op(np.repeat(v.data, n, axis=1), (v,), grad_fn)


# ---------------------------------------------------------------------------
# structural ops
# ---------------------------------------------------------------------------


def append_ones(x: Tensor) -> Tensor:
    """Append a constant-1 column (bias input augmentation)."""
    rows = x.data.shape[0]
    out = np.concatenate([x.data, np.ones((rows, 1))], axis=1)

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(x, u[:, :-1])

    return make_op(out, (x,), grad_fn)


def append_const_col(x: Tensor, col: np.ndarray) -> Tensor:
    """Append one non-trainable column to the right of ``x``."""
    col = np.asarray(col, dtype=np.float64).reshape(-1, 1)
    if col.shape[0] != x.data.shape[0]:
        raise DimensionError(
            f"append_const_col: column length {col.shape[0]} vs {x.data.shape[0]} rows"
        )
    out = np.concatenate([x.data, col], axis=1)

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(x, u[:, :-1])

    return make_op(out, (x,), grad_fn)


def slice_cols(x: Tensor, j0: int, j1: int) -> Tensor:
    if not (0 <= j0 < j1 <= x.data.shape[1]):
        raise DimensionError(f"slice_cols: [{j0}:{j1}] out of range for {x.data.shape}")

    def grad_fn(u: np.ndarray) -> None:
        g = np.zeros_like(x.data)
        g[:, j0:j1] = u
        accumulate_grad(x, g)

    return make_op(x.data[:, j0:j1].copy(), (x,), grad_fn)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = parts[0].data.shape[0]
    for p in parts:
        if p.data.shape[0] != rows:
            raise DimensionError(
                f"concat_cols: row counts differ: {[q.data.shape for q in parts]}"
            )
    widths = [p.data.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def grad_fn(u: np.ndarray) -> None:
        for p, j0, j1 in zip(parts, offsets[:-1], offsets[1:]):
            accumulate_grad(p, u[:, j0:j1])

    return make_op(np.concatenate([p.data for p in parts], axis=1), tuple(parts), grad_fn)


def frame_stack(x: Tensor, factor: int) -> Tensor:
    """Stack every ``factor`` consecutive rows into one row, zero-padding the tail.

    (T, F) -> (ceil(T/factor), factor*F); row t holds rows [t*factor, (t+1)*factor).
    """
    t_in, f_in = x.data.shape
    n_out = -(-t_in // factor)
    pad = n_out * factor - t_in
    padded = np.concatenate([x.data, np.zeros((pad, f_in))], axis=0) if pad else x.data
    out = padded.reshape(n_out, factor * f_in).copy()

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(x, u.reshape(n_out * factor, f_in)[:t_in])

    return make_op(out, (x,), grad_fn)


# ---------------------------------------------------------------------------
# fused row-wise ops
# ---------------------------------------------------------------------------


def softmax_rows(x: Tensor) -> Tensor:
    from .linalg import softmax_rows as _softmax

    p = _softmax(x.data)

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(x, p * (u - np.sum(u * p, axis=1, keepdims=True)))

    return make_op(p, (x,), grad_fn)


def log_softmax_rows(x: Tensor) -> Tensor:
    m = x.data.max(axis=1, keepdims=True)
    shifted = x.data - m
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = shifted - logz
    p = np.exp(out)

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(x, u - p * u.sum(axis=1, keepdims=True))

    return make_op(out, (x,), grad_fn)


def layer_norm_rows(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-12) -> Tensor:
    """Per-row normalization to zero mean / unit variance, then gain and bias.

    ``gain`` and ``bias`` are 1xC and apply to every row.
    """
    n = x.data.shape[1]
    if gain.data.shape != (1, n) or bias.data.shape != (1, n):
        raise DimensionError(
            f"layer_norm_rows: gain {gain.data.shape}, bias {bias.data.shape} "
            f"do not match row width {n}"
        )
    mu = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gain.data + bias.data

    def grad_fn(u: np.ndarray) -> None:
        du = u * gain.data
        # d/dx of (x - mu) * inv_std with mu, var functions of x
        dvar = np.sum(du * centered, axis=1, keepdims=True) * (-0.5) * inv_std**3
        dmu = np.sum(du, axis=1, keepdims=True) * (-inv_std)
        dx = du * inv_std + dvar * 2.0 * centered / n + dmu / n
        accumulate_grad(x, dx)
        accumulate_grad(gain, np.sum(u * xhat, axis=0, keepdims=True))
        accumulate_grad(bias, np.sum(u, axis=0, keepdims=True))

    return make_op(out, (x, gain, bias), grad_fn)
