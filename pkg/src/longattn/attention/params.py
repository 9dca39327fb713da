"""Attention variant tags and per-head trainable parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..errors import ConfigError
from ..numerics.tensor import Tensor, param

# At initialization the frame-index feature of Gaussian attention is scaled so
# that the kernel penalty reaches 1/2 at this many frames of offset. Mirrors
# the soft-mask width initialization below; training reshapes it per head.
INDEX_WINDOW_INIT = 6.0

SOFT_MASK_SIGMA_INIT = 10.0


class AttentionVariant(Enum):
    STANDARD = "standard"
    SOFT_MASK = "soft_mask"
    RELATIVE_PE = "relative_pe"
    SHARED_QK = "shared_qk"
    GAUSSIAN = "gaussian"
    GAUSSIAN_FRAME_INDEX = "gaussian_frame_index"
    # Reproduces the known failure mode: frame indexing on top of attention
    # whose scores are not shift-invariant.
    STANDARD_FRAME_INDEX = "standard_frame_index"

    @property
    def frame_indexed(self) -> bool:
        return self in (AttentionVariant.GAUSSIAN_FRAME_INDEX,
                        AttentionVariant.STANDARD_FRAME_INDEX)

    @property
    def shares_qk(self) -> bool:
        return self in (AttentionVariant.SHARED_QK, AttentionVariant.GAUSSIAN,
                        AttentionVariant.GAUSSIAN_FRAME_INDEX)

    @property
    def default_abs_pe(self) -> bool:
        """Whether absolute positional encoding is added by default."""
        return self in (AttentionVariant.STANDARD, AttentionVariant.SOFT_MASK,
                        AttentionVariant.SHARED_QK, AttentionVariant.STANDARD_FRAME_INDEX)

    @classmethod
    def parse(cls, name: str) -> "AttentionVariant":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(v.value for v in cls)
            raise ConfigError(f"unknown attention variant {name!r}; one of: {valid}") from None


@dataclass
class AttentionParams:
    """Per-head weights; only the fields the configured variant uses are set.

    Inputs to every linear map are augmented with a trailing constant 1, so
    each matrix carries its own bias column. ``log_sigma_mask`` stores the
    soft-mask width as a free parameter, keeping sigma strictly positive.
    """

    w_q: Tensor | None = None
    w_k_x: Tensor | None = None
    w_s: Tensor | None = None
    log_sigma_mask: Tensor | None = None
    w_k_r: Tensor | None = None
    u: Tensor | None = None
    v: Tensor | None = None
    w_v: Tensor | None = None

    def named(self, prefix: str = "") -> list[tuple[str, Tensor]]:
        out = []
        for field in ("w_q", "w_k_x", "w_s", "log_sigma_mask", "w_k_r", "u", "v", "w_v"):
            t = getattr(self, field)
            if t is not None:
                out.append((f"{prefix}{field}", t))
        return out

    @property
    def sigma_mask(self) -> float:
        if self.log_sigma_mask is None:
            raise ConfigError("this head has no soft-mask parameter")
        return math.exp(self.log_sigma_mask.data[0, 0])


def init_attention_params(
    variant: AttentionVariant,
    d_model: int,
    d_k: int,
    d_v: int,
    alpha: float,
    rng: np.random.Generator,
) -> AttentionParams:
    """Draw one head's weights; the draw order is fixed for reproducibility."""
    score_in = d_model + (2 if variant.frame_indexed else 1)
    std = 1.0 / math.sqrt(score_in)
    p = AttentionParams()
    if variant.shares_qk:
        gauss = variant in (AttentionVariant.GAUSSIAN, AttentionVariant.GAUSSIAN_FRAME_INDEX)
        w_std = std / d_k**0.25 if gauss else std
        w = rng.normal(0.0, w_std, size=(d_k, score_in))
        if variant is AttentionVariant.GAUSSIAN_FRAME_INDEX:
            # index feature sits between the model features and the bias column
            norm = alpha * d_k**0.25 / INDEX_WINDOW_INIT
            w[:, d_model] = norm / math.sqrt(d_k)
        p.w_s = param(w)
    else:
        p.w_q = param(rng.normal(0.0, std, size=(d_k, score_in)))
        p.w_k_x = param(rng.normal(0.0, std, size=(d_k, score_in)))
    if variant is AttentionVariant.SOFT_MASK:
        p.log_sigma_mask = param([[math.log(SOFT_MASK_SIGMA_INIT)]])
    if variant is AttentionVariant.RELATIVE_PE:
        p.w_k_r = param(rng.normal(0.0, 1.0 / math.sqrt(d_model), size=(d_k, d_model)))
        p.u = param(rng.normal(0.0, 0.02, size=(1, d_k)))
        p.v = param(rng.normal(0.0, 0.02, size=(1, d_k)))
    p.w_v = param(rng.normal(0.0, 1.0 / math.sqrt(d_model + 1), size=(d_v, d_model + 1)))
    return p
