"""CTC loss (log-space forward-backward), brute-force oracle, greedy decoding,
and token error metrics.

Token id 0 is the blank everywhere. ``ctc_loss`` treats the lattice entries
as free log-scores: the analytic gradient is exact for the unnormalized
marginal-likelihood function, which is what finite differences probe.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionError,
    InfeasibleAlignmentError,
    SizeError,
    UndefinedRateError,
)
from .numerics.linalg import as_matrix
from .numerics.tensor import Tensor, accumulate_grad, make_op

BLANK_ID = 0

BRUTE_FORCE_BUDGET = 10**7

NEG_INF = -np.inf


def validate_labels(labels: Sequence[int], vocab: int) -> list[int]:
    labels = [int(t) for t in labels]
    for t in labels:
        if not (1 <= t < vocab):
            raise ConfigError(
                f"label {t} outside the token range [1, {vocab - 1}] (0 is blank)"
            )
    return labels


def min_frames_required(labels: Sequence[int]) -> int:
    """Shortest lattice that can emit ``labels``: one frame per token plus a
    blank between equal neighbours."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def validate_lattice(lattice, tol: float = 1e-10) -> np.ndarray:
    """Check that each row is a normalized log-probability distribution."""
    lattice = as_matrix(lattice)
    row_lse = np.log(np.exp(lattice - lattice.max(axis=1, keepdims=True))
                     .sum(axis=1)) + lattice.max(axis=1)
    if np.abs(row_lse).max() > tol:
        raise DimensionError(
            f"lattice rows are not normalized: max |logsumexp| = {np.abs(row_lse).max():.3e}"
        )
    return lattice


def _extended_labels(labels: Sequence[int]) -> np.ndarray:
    ext = np.zeros(2 * len(labels) + 1, dtype=np.int64)
    ext[1::2] = labels
    return ext


def ctc_loss(lattice, labels: Sequence[int]) -> tuple[float, np.ndarray]:
    """Negative log-likelihood of ``labels`` and its gradient w.r.t. the lattice.

    The lattice is an L x vocab matrix of per-frame log-probabilities. Raises
    ``InfeasibleAlignmentError`` when no alignment exists instead of returning
    a large float.
    """
    y = as_matrix(lattice)
    n_frames, vocab = y.shape
    labels = validate_labels(labels, vocab)
    if min_frames_required(labels) > n_frames:
        raise InfeasibleAlignmentError(min_frames_required(labels), n_frames)

    ext = _extended_labels(labels)
    n_states = ext.shape[0]
    # skip transition s-2 -> s allowed into non-blank states that differ from
    # the token two steps back
    skip_ok = np.zeros(n_states, dtype=bool)
    if n_states > 2:
        skip_ok[2:] = (ext[2:] != BLANK_ID) & (ext[2:] != ext[:-2])

    emit = y[:, ext]  # (n_frames, n_states)

    alpha = np.full((n_frames, n_states), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if n_states > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, n_frames):
        prev = alpha[t - 1]
        step = np.full(n_states, NEG_INF)
        step[1:] = prev[:-1]
        acc = np.logaddexp(prev, step)
        skip = np.full(n_states, NEG_INF)
        skip[2:] = prev[:-2]
        acc = np.where(skip_ok, np.logaddexp(acc, skip), acc)
        alpha[t] = acc + emit[t]

    if n_states > 1:
        log_p = np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    else:
        log_p = alpha[-1, -1]

    beta = np.full((n_frames, n_states), NEG_INF)
    beta[-1, -1] = 0.0
    if n_states > 1:
        beta[-1, -2] = 0.0
    # transition s -> s+2 allowed iff the skip into state s+2 is allowed
    skip_out_ok = np.zeros(n_states, dtype=bool)
    if n_states > 2:
        skip_out_ok[:-2] = skip_ok[2:]
    for t in range(n_frames - 2, -1, -1):
        nxt = beta[t + 1] + emit[t + 1]
        step = np.full(n_states, NEG_INF)
        step[:-1] = nxt[1:]
        acc = np.logaddexp(nxt, step)
        skip = np.full(n_states, NEG_INF)
        if n_states > 2:
            skip[:-2] = nxt[2:]
        acc = np.where(skip_out_ok, np.logaddexp(acc, skip), acc)
        beta[t] = acc

    occupancy = alpha + beta  # log joint of passing through (t, s)
    log_gamma = np.full((n_frames, vocab), NEG_INF)
    for s, token in enumerate(ext):
        log_gamma[:, token] = np.logaddexp(log_gamma[:, token], occupancy[:, s])
    grad = -np.exp(log_gamma - log_p)
    return float(-log_p), grad


def ctc_loss_op(lattice: Tensor, labels: Sequence[int]) -> Tensor:
    """CTC loss as a differentiable graph node over a lattice tensor."""
    loss, grad = ctc_loss(lattice.data, labels)

    def grad_fn(u: np.ndarray) -> None:
        accumulate_grad(lattice, u[0, 0] * grad)

    return make_op(np.array([[loss]]), (lattice,), grad_fn)


def collapse_frames(frames: Sequence[int]) -> list[int]:
    """Merge consecutive repeats, then drop blanks."""
    out: list[int] = []
    prev = None
    for f in frames:
        if f != prev and f != BLANK_ID:
            out.append(int(f))
        prev = f
    return out


def ctc_brute_force(lattice, labels: Sequence[int]) -> float:
    """Loss by enumerating every frame labeling whose collapse equals ``labels``."""
    y = as_matrix(lattice)
    n_frames, vocab = y.shape
    labels = validate_labels(labels, vocab)
    if vocab**n_frames > BRUTE_FORCE_BUDGET:
        raise SizeError(
            f"brute force needs {vocab}^{n_frames} paths, over the "
            f"{BRUTE_FORCE_BUDGET} budget"
        )
    target = list(labels)
    log_p = NEG_INF
    for path in itertools.product(range(vocab), repeat=n_frames):
        if collapse_frames(path) == target:
            log_p = np.logaddexp(log_p, sum(y[t, k] for t, k in enumerate(path)))
    return float(-log_p)


def greedy_decode(lattice) -> list[int]:
    """Per-frame argmax, collapse repeats, drop blanks."""
    y = as_matrix(lattice)
    return collapse_frames(np.argmax(y, axis=1))


def edit_distance(hyp: Sequence[int], ref: Sequence[int]) -> int:
    """Levenshtein distance with unit substitution/deletion/insertion costs."""
    m, n = len(hyp), len(ref)
    prev = list(range(n + 1))
    for i in range(1, m + 1):
        cur = [i] + [0] * n
        for j in range(1, n + 1):
            sub = prev[j - 1] + (hyp[i - 1] != ref[j - 1])
            cur[j] = min(sub, prev[j] + 1, cur[j - 1] + 1)
        prev = cur
    return prev[n]


def token_error_rate(hyp: Sequence[int], ref: Sequence[int]) -> float:
    """(substitutions + deletions + insertions) / |ref|."""
    if len(ref) == 0:
        raise UndefinedRateError("token error rate is undefined for an empty reference")
    return edit_distance(hyp, ref) / len(ref)
