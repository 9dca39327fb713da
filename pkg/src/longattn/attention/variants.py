"""Attention score mechanisms.

Each variant is split into a projection stage (per-frame linear maps) and a
pairwise stage (everything whose footprint grows with the squared sequence
length); the memory-footprint tool measures the pairwise stage. All paths
end in a row softmax, so every returned matrix is row-stochastic.

``attn_kernel_form`` is the plain-array oracle for the algebraic identity
between shared-QK attention and its normalized-kernel rewriting: the scores
are computed from pairwise feature distances and per-frame energy factors
instead of inner products, and must agree with ``attn_shared_qk``.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError, InternalError
from ..numerics.linalg import as_matrix
from ..numerics.tensor import (
    Tensor,
    accumulate_grad,
    add,
    append_ones,
    append_const_col,
    const,
    exp,
    make_op,
    matmul,
    mul_scalar,
    mul_scalar_tensor,
    pow_scalar,
    softmax_rows,
    tile_rows,
    transpose,
)
from .encodings import (
    DEFAULT_ALPHA,
    frame_index_column,
    signed_sinusoid_table,
    squared_offset_matrix,
)
from .params import AttentionParams, AttentionVariant


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else const(as_matrix(x))


# ---------------------------------------------------------------------------
# custom pairwise ops
# ---------------------------------------------------------------------------


def pairwise_sqdist_scores(a: Tensor) -> Tensor:
    """S[i, j] = -||a_i - a_j||^2 / 2 for the rows of ``a``."""
    g = np.einsum("ij,ij->i", a.data, a.data)
    gram = a.data @ a.data.T
    scores = -0.5 * (g[:, None] + g[None, :]) + gram

    def grad_fn(u: np.ndarray) -> None:
        r = u.sum(axis=1)
        c = u.sum(axis=0)
        accumulate_grad(a, u @ a.data + u.T @ a.data - (r + c)[:, None] * a.data)

    return make_op(scores, (a,), grad_fn)


def _offset_index(length: int, table_rows: int) -> np.ndarray:
    idx = np.arange(length)
    offsets = idx[:, None] - idx[None, :] + length - 1
    if table_rows != 2 * length - 1 or offsets.min() < 0 or offsets.max() >= table_rows:
        raise InternalError(
            f"relative-offset table has {table_rows} rows, needs {2 * length - 1} "
            f"for length {length}"
        )
    return offsets


def offset_dot(q: Tensor, table: Tensor) -> Tensor:
    """S[i, j] = q_i . table[i - j + L - 1] for an offset-indexed table."""
    length = q.data.shape[0]
    offsets = _offset_index(length, table.data.shape[0])
    scores = np.empty((length, length))
    for i in range(length):
        scores[i] = table.data[offsets[i]] @ q.data[i]

    def grad_fn(u: np.ndarray) -> None:
        dq = np.empty_like(q.data)
        dtable = np.zeros_like(table.data)
        for i in range(length):
            rows = table.data[offsets[i]]
            dq[i] = u[i] @ rows
            # offsets within one row are distinct, so fancy += is safe
            dtable[offsets[i]] += u[i][:, None] * q.data[i][None, :]
        accumulate_grad(q, dq)
        accumulate_grad(table, dtable)

    return make_op(scores, (q, table), grad_fn)


def offset_gather(col: Tensor, length: int) -> Tensor:
    """S[i, j] = col[i - j + L - 1] for an offset-indexed column vector."""
    offsets = _offset_index(length, col.data.shape[0])
    scores = col.data[offsets, 0]

    def grad_fn(u: np.ndarray) -> None:
        dcol = np.zeros_like(col.data)
        for i in range(length):
            dcol[offsets[i], 0] += u[i]
        accumulate_grad(col, dcol)

    return make_op(scores, (col,), grad_fn)


# ---------------------------------------------------------------------------
# scaled dot-product attention and its masked variant
# ---------------------------------------------------------------------------


def qk_projections(x, w_q, w_k) -> tuple[Tensor, Tensor]:
    xa = append_ones(_as_tensor(x))
    return matmul(xa, transpose(w_q)), matmul(xa, transpose(w_k))


def dot_product_pair_stage(q: Tensor, k: Tensor, mask: Tensor | None = None) -> Tensor:
    d_k = q.data.shape[1]
    scores = mul_scalar(matmul(q, transpose(k)), 1.0 / math.sqrt(d_k))
    if mask is not None:
        scores = add(scores, mask)
    return softmax_rows(scores)


def attn_standard(x, w_q: Tensor, w_k: Tensor) -> Tensor:
    """Row-softmax of scaled query/key inner products."""
    q, k = qk_projections(x, w_q, w_k)
    return dot_product_pair_stage(q, k)


def soft_mask_tensor(length: int, log_sigma: Tensor) -> Tensor:
    """Trainable-width Gaussian window as an additive pre-softmax penalty."""
    base = const(-0.5 * squared_offset_matrix(length))
    inv_sigma_sq = pow_scalar(exp(log_sigma), -2.0)
    return mul_scalar_tensor(base, inv_sigma_sq)


def attn_soft_mask(x, w_q: Tensor, w_k: Tensor, log_sigma: Tensor) -> Tensor:
    q, k = qk_projections(x, w_q, w_k)
    return dot_product_pair_stage(q, k, mask=soft_mask_tensor(q.data.shape[0], log_sigma))


# ---------------------------------------------------------------------------
# shared-QK attention and its Gaussian kernelization
# ---------------------------------------------------------------------------


def shared_projection(x, w_s: Tensor) -> Tensor:
    return matmul(append_ones(_as_tensor(x)), transpose(w_s))


def attn_shared_qk(x, w_s: Tensor) -> Tensor:
    """Scaled dot-product attention with one shared query/key matrix."""
    q = shared_projection(x, w_s)
    return dot_product_pair_stage(q, q)


def gaussian_projection(x, w_s: Tensor) -> Tensor:
    d_k = w_s.data.shape[0]
    return mul_scalar(shared_projection(x, w_s), d_k**-0.25)


def gaussian_pair_stage(a: Tensor) -> Tensor:
    return softmax_rows(pairwise_sqdist_scores(a))


def attn_gaussian(x, w_s: Tensor) -> Tensor:
    """Row-normalized Gaussian kernel over pairwise feature distances.

    Scores depend only on differences of (projected) input frames, so the
    result is invariant under a constant shift of all frames.
    """
    return gaussian_pair_stage(gaussian_projection(x, w_s))


def sigma_inverse(w_s) -> np.ndarray:
    """Gram form of the scaled shared weight; positive semidefinite."""
    w_s = w_s.data if isinstance(w_s, Tensor) else as_matrix(w_s)
    w_hat = w_s / w_s.shape[0] ** 0.25
    return w_hat.T @ w_hat


def kernel_form_factors(x, w_s) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise kernel exp(-d_ij/2) and per-frame energies exp(q_i/2).

    d_ij is the squared Mahalanobis distance between augmented frames under
    ``sigma_inverse``; q_i the matching squared norm. The elementwise product
    kernel * energy_i * energy_j recovers exp of the shared-QK Gram matrix.
    """
    x = as_matrix(x)
    w_s = w_s.data if isinstance(w_s, Tensor) else as_matrix(w_s)
    xa = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
    a = xa @ (w_s / w_s.shape[0] ** 0.25).T
    g = np.einsum("ij,ij->i", a, a)
    sqdist = g[:, None] + g[None, :] - 2.0 * (a @ a.T)
    return np.exp(-0.5 * sqdist), np.exp(0.5 * g)


def attn_kernel_form(x, w_s) -> np.ndarray:
    """Shared-QK attention computed through the kernel/energy factorization."""
    kernel, energy = kernel_form_factors(x, w_s)
    weights = kernel * energy[:, None] * energy[None, :]
    return weights / weights.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# relative positional encoding
# ---------------------------------------------------------------------------


def relative_terms(
    q: Tensor, kx: Tensor, w_k_r: Tensor, u: Tensor, v: Tensor, r_table: Tensor
) -> Tensor:
    """Four-term pre-softmax scores: content, content-position, and two biases."""
    length = q.data.shape[0]
    kr = matmul(r_table, transpose(w_k_r))
    t_content = matmul(q, transpose(kx))
    t_position = offset_dot(q, kr)
    t_content_bias = tile_rows(transpose(matmul(kx, transpose(u))), length)
    t_position_bias = offset_gather(matmul(kr, transpose(v)), length)
    return add(add(t_content, t_position), add(t_content_bias, t_position_bias))


def scores_relative(x, w_q, w_k_x, w_k_r, u, v, r_table=None) -> Tensor:
    """Unscaled relative-position scores; caller scales by 1/sqrt(d_k) and softmaxes."""
    q, kx = qk_projections(x, w_q, w_k_x)
    if r_table is None:
        r_table = const(signed_sinusoid_table(q.data.shape[0], w_k_r.data.shape[1]))
    return relative_terms(q, kx, w_k_r, u, v, _as_tensor(r_table))


def relative_pair_stage(
    q: Tensor, kx: Tensor, w_k_r: Tensor, u: Tensor, v: Tensor
) -> Tensor:
    r_table = const(signed_sinusoid_table(q.data.shape[0], w_k_r.data.shape[1]))
    scores = relative_terms(q, kx, w_k_r, u, v, r_table)
    d_k = q.data.shape[1]
    return softmax_rows(mul_scalar(scores, 1.0 / math.sqrt(d_k)))


def attn_relative(x, w_q, w_k_x, w_k_r, u, v) -> Tensor:
    q, kx = qk_projections(x, w_q, w_k_x)
    return relative_pair_stage(q, kx, w_k_r, u, v)


# ---------------------------------------------------------------------------
# dispatcher
# ---------------------------------------------------------------------------


def frame_index_augment_op(x: Tensor, start_index: int, alpha: float) -> Tensor:
    return append_const_col(x, frame_index_column(x.data.shape[0], start_index, alpha))


def attention_weights(
    x,
    params: AttentionParams,
    variant: AttentionVariant,
    alpha: float = DEFAULT_ALPHA,
    start_index: int = 0,
) -> Tensor:
    """Row-stochastic attention matrix for one head under the given variant."""
    xt = _as_tensor(x)
    if variant.frame_indexed:
        xt = frame_index_augment_op(xt, start_index, alpha)
    if variant in (AttentionVariant.STANDARD, AttentionVariant.STANDARD_FRAME_INDEX):
        return attn_standard(xt, params.w_q, params.w_k_x)
    if variant is AttentionVariant.SOFT_MASK:
        return attn_soft_mask(xt, params.w_q, params.w_k_x, params.log_sigma_mask)
    if variant is AttentionVariant.SHARED_QK:
        return attn_shared_qk(xt, params.w_s)
    if variant in (AttentionVariant.GAUSSIAN, AttentionVariant.GAUSSIAN_FRAME_INDEX):
        return attn_gaussian(xt, params.w_s)
    if variant is AttentionVariant.RELATIVE_PE:
        return attn_relative(xt, params.w_q, params.w_k_x, params.w_k_r, params.u, params.v)
    raise ConfigError(f"unhandled attention variant: {variant}")


def export_attn_csv(weights, path) -> None:
    """Write an attention matrix as CSV with 17 significant digits."""
    weights = as_matrix(weights)
    with open(path, "w", encoding="utf-8") as fh:
        for row in weights:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
