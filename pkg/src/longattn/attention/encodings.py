"""Positional encodings, Gaussian window masks, and frame indexing.

Array-level building blocks; the trainable attention paths in ``variants``
reuse the same formulas through autodiff ops.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DimensionError
from ..numerics.linalg import as_matrix

DEFAULT_ALPHA = 100.0


def sinusoid_encoding(length: int, dim: int) -> np.ndarray:
    """Absolute sinusoid encoding: row i holds sin/cos of i at geometric frequencies.

    Column 2k is sin(i / 10000^(2k/dim)), column 2k+1 the matching cos.
    """
    if dim % 2 != 0:
        raise ConfigError(f"sinusoid encoding needs an even dimension, got {dim}")
    positions = np.arange(length, dtype=np.float64)
    return _sinusoid_at(positions, dim)


def signed_sinusoid_table(length: int, dim: int) -> np.ndarray:
    """Sinusoid rows for every signed offset -(L-1)..(L-1); row index = offset + L - 1."""
    if dim % 2 != 0:
        raise ConfigError(f"sinusoid encoding needs an even dimension, got {dim}")
    offsets = np.arange(-(length - 1), length, dtype=np.float64)
    return _sinusoid_at(offsets, dim)


def _sinusoid_at(positions: np.ndarray, dim: int) -> np.ndarray:
    k = np.arange(0, dim, 2, dtype=np.float64)
    inv_freq = 10000.0 ** (-k / dim)
    args = positions[:, None] * inv_freq[None, :]
    out = np.empty((positions.shape[0], dim))
    out[:, 0::2] = np.sin(args)
    out[:, 1::2] = np.cos(args)
    return out


def squared_offset_matrix(length: int) -> np.ndarray:
    """(i - j)^2 for all frame pairs."""
    idx = np.arange(length, dtype=np.float64)
    diff = idx[:, None] - idx[None, :]
    return diff * diff


def soft_mask_matrix(length: int, sigma: float) -> np.ndarray:
    """Additive Gaussian-window penalty -(i-j)^2 / (2 sigma^2)."""
    if sigma <= 0:
        raise ConfigError(f"soft mask width must be positive, got {sigma}")
    return -squared_offset_matrix(length) / (2.0 * sigma * sigma)


def apply_soft_mask(scores, mask) -> np.ndarray:
    """Add the mask to pre-softmax scores."""
    scores, mask = as_matrix(scores), as_matrix(mask)
    if scores.shape != mask.shape:
        raise DimensionError(
            f"apply_soft_mask: shapes differ: {scores.shape} vs {mask.shape}"
        )
    return scores + mask


def frame_index_column(length: int, start_index: int, alpha: float) -> np.ndarray:
    """Scaled frame indices (start_index + i) / alpha as an Lx1 column."""
    if alpha <= 0:
        raise ConfigError(f"frame-index scale alpha must be positive, got {alpha}")
    return ((np.arange(length, dtype=np.float64) + start_index) / alpha).reshape(-1, 1)


def frame_index_augment(x, start_index: int = 0, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Append the scaled frame index as one extra feature column."""
    x = as_matrix(x)
    return np.concatenate([x, frame_index_column(x.shape[0], start_index, alpha)], axis=1)
