"""Element-count accounting for the attention pairwise stage.

Counts cover the pairwise-interaction intermediates of one head: score,
mask, and normalization matrices, plus the relative-offset tables. Per-frame
projections (linear in sequence length) and parameters are excluded; they
are the same for every variant and do not drive the long-sequence memory
behaviour. The measured number comes from the allocation meter in the
numerics substrate while the pairwise stage runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..attention.params import AttentionVariant, init_attention_params
from ..attention.variants import (
    dot_product_pair_stage,
    frame_index_augment_op,
    gaussian_pair_stage,
    gaussian_projection,
    qk_projections,
    relative_pair_stage,
    shared_projection,
    soft_mask_tensor,
)
from ..encoder import EncoderConfig
from ..errors import ConfigError
from ..numerics.tensor import const, count_allocations


@dataclass
class MemoryFootprint:
    variant: str
    length: int
    analytic: int
    measured: int


def analytic_pair_elements(variant: AttentionVariant, length: int, cfg: EncoderConfig) -> int:
    """Closed-form element count of the pairwise stage for one head."""
    sq = length * length
    if variant in (AttentionVariant.STANDARD, AttentionVariant.STANDARD_FRAME_INDEX,
                   AttentionVariant.SHARED_QK):
        # raw scores, scaled scores, attention
        return 3 * sq
    if variant is AttentionVariant.SOFT_MASK:
        # standard plus offset template, mask, masked scores, and 2 width scalars
        return 6 * sq + 2
    if variant in (AttentionVariant.GAUSSIAN, AttentionVariant.GAUSSIAN_FRAME_INDEX):
        # pairwise distances, attention
        return 2 * sq
    if variant is AttentionVariant.RELATIVE_PE:
        # four term matrices, three sums, scaled scores, attention, plus the
        # offset tables (sinusoids, their key projection, position bias) and
        # the content-bias column
        span = 2 * length - 1
        return 9 * sq + span * (cfg.d_model + cfg.d_k + 1) + length
    raise ConfigError(f"unhandled variant {variant}")


def measure_pair_elements(variant: AttentionVariant, length: int, cfg: EncoderConfig,
                          seed: int = 0) -> int:
    """Run one head's pairwise stage under the allocation meter."""
    rng = np.random.default_rng([seed, 0x6D])
    params = init_attention_params(variant, cfg.d_model, cfg.d_k, cfg.d_v, cfg.alpha, rng)
    x = const(rng.normal(size=(length, cfg.d_model)))
    if variant.frame_indexed:
        x = frame_index_augment_op(x, 0, cfg.alpha)
    if variant in (AttentionVariant.STANDARD, AttentionVariant.STANDARD_FRAME_INDEX):
        q, k = qk_projections(x, params.w_q, params.w_k_x)
        with count_allocations() as meter:
            dot_product_pair_stage(q, k)
    elif variant is AttentionVariant.SOFT_MASK:
        q, k = qk_projections(x, params.w_q, params.w_k_x)
        with count_allocations() as meter:
            dot_product_pair_stage(q, k, mask=soft_mask_tensor(length, params.log_sigma_mask))
    elif variant is AttentionVariant.SHARED_QK:
        q = shared_projection(x, params.w_s)
        with count_allocations() as meter:
            dot_product_pair_stage(q, q)
    elif variant in (AttentionVariant.GAUSSIAN, AttentionVariant.GAUSSIAN_FRAME_INDEX):
        a = gaussian_projection(x, params.w_s)
        with count_allocations() as meter:
            gaussian_pair_stage(a)
    elif variant is AttentionVariant.RELATIVE_PE:
        q, kx = qk_projections(x, params.w_q, params.w_k_x)
        with count_allocations() as meter:
            relative_pair_stage(q, kx, params.w_k_r, params.u, params.v)
    else:
        raise ConfigError(f"unhandled variant {variant}")
    return meter.elements


def memory_footprint_estimate(variant: AttentionVariant | str, length: int,
                              cfg: EncoderConfig) -> MemoryFootprint:
    """Analytic and measured pairwise-stage element counts for one head."""
    if length < 1:
        raise ConfigError(f"length must be >= 1, got {length}")
    if isinstance(variant, str):
        variant = AttentionVariant.parse(variant)
    return MemoryFootprint(
        variant=variant.value,
        length=length,
        analytic=analytic_pair_elements(variant, length, cfg),
        measured=measure_pair_elements(variant, length, cfg),
    )


def write_memory_csv(rows: list[MemoryFootprint], path, config_hash: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        fh.write("variant,length,analytic_elements,measured_elements\n")
        for r in rows:
            fh.write(f"{r.variant},{r.length},{r.analytic},{r.measured}\n")
