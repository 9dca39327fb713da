"""Toy CTC encoder: frame-stacking front end, pre-norm self-attention blocks
with position-wise feed-forward networks, and a linear head to token logits.

The reference-scale recipe this is a scaled-down analogue of used 12 blocks,
4 heads, 256-dimensional scores, and a 2048-wide feed-forward with x4
temporal subsampling; the desk-scale defaults below train in minutes on a
CPU while keeping the same structure.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .attention.encodings import DEFAULT_ALPHA, sinusoid_encoding
from .attention.multihead import multi_head_attention
from .attention.params import AttentionParams, AttentionVariant, init_attention_params
from .container import read_container, write_container
from .errors import ConfigError, ShortInputError
from .numerics.tensor import (
    Tensor,
    add,
    append_ones,
    const,
    frame_stack,
    layer_norm_rows,
    matmul,
    param,
    relu,
    transpose,
)

CHECKPOINT_FORMAT = "longattn-checkpoint-v1"


@dataclass
class EncoderConfig:
    feat_dim: int = 8
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 2
    d_k: int = 32
    d_ff: int = 128
    subsample_factor: int = 4
    variant: AttentionVariant = AttentionVariant.GAUSSIAN_FRAME_INDEX
    vocab_size: int = 12
    alpha: float = DEFAULT_ALPHA
    use_abs_pe: bool | None = None  # None: variant default

    def __post_init__(self):
        if isinstance(self.variant, str):
            self.variant = AttentionVariant.parse(self.variant)
        self.validate()

    def validate(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}"
            )
        if self.subsample_factor < 1:
            raise ConfigError(f"subsample_factor must be >= 1, got {self.subsample_factor}")
        if self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be >= 2 (blank + tokens), got {self.vocab_size}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if min(self.feat_dim, self.d_model, self.d_k, self.d_ff, self.n_layers) < 1:
            raise ConfigError("feat_dim, d_model, d_k, d_ff, n_layers must be positive")
        if self.abs_pe_enabled and self.d_model % 2 != 0:
            raise ConfigError(
                f"absolute positional encoding needs an even d_model, got {self.d_model}"
            )
        if self.variant is AttentionVariant.RELATIVE_PE and self.d_model % 2 != 0:
            raise ConfigError(
                f"relative positional encoding needs an even d_model, got {self.d_model}"
            )

    @property
    def d_v(self) -> int:
        return self.d_model // self.n_heads

    @property
    def abs_pe_enabled(self) -> bool:
        if self.use_abs_pe is None:
            return self.variant.default_abs_pe
        return self.use_abs_pe

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**d)


@dataclass
class SABlockParams:
    heads: list[AttentionParams]
    w_o: Tensor
    ln1_gain: Tensor
    ln1_bias: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    ffn_w1: Tensor
    ffn_w2: Tensor

    def named(self, prefix: str) -> list[tuple[str, Tensor]]:
        out: list[tuple[str, Tensor]] = []
        for i, head in enumerate(self.heads):
            out += head.named(f"{prefix}head{i}.")
        out += [
            (f"{prefix}w_o", self.w_o),
            (f"{prefix}ln1_gain", self.ln1_gain),
            (f"{prefix}ln1_bias", self.ln1_bias),
            (f"{prefix}ln2_gain", self.ln2_gain),
            (f"{prefix}ln2_bias", self.ln2_bias),
            (f"{prefix}ffn_w1", self.ffn_w1),
            (f"{prefix}ffn_w2", self.ffn_w2),
        ]
        return out


@dataclass
class ModelParams:
    subsample_proj: Tensor
    blocks: list[SABlockParams]
    final_gain: Tensor
    final_bias: Tensor
    w_out: Tensor

    def named(self) -> list[tuple[str, Tensor]]:
        out = [("subsample_proj", self.subsample_proj)]
        for i, block in enumerate(self.blocks):
            out += block.named(f"block{i}.")
        out += [("final_gain", self.final_gain), ("final_bias", self.final_bias),
                ("w_out", self.w_out)]
        return out

    def tensors(self) -> list[Tensor]:
        return [t for _, t in self.named()]

    def zero_grad(self) -> None:
        for t in self.tensors():
            t.zero_grad()


@dataclass
class TrainedModel:
    config: EncoderConfig
    params: ModelParams
    meta: dict = field(default_factory=dict)


def init_model(cfg: EncoderConfig, seed: int, zero_residual: bool = True) -> ModelParams:
    """Draw all weights; with ``zero_residual`` the attention output and second
    feed-forward maps start at zero so every block begins as the identity."""
    rng = np.random.default_rng([seed, 0x6C61])
    d = cfg.d_model
    stacked = cfg.subsample_factor * cfg.feat_dim

    def linear(rows, cols, zero=False):
        if zero:
            return param(np.zeros((rows, cols)))
        return param(rng.normal(0.0, 1.0 / math.sqrt(cols), size=(rows, cols)))

    blocks = []
    for _ in range(cfg.n_layers):
        heads = [init_attention_params(cfg.variant, d, cfg.d_k, cfg.d_v, cfg.alpha, rng)
                 for _ in range(cfg.n_heads)]
        blocks.append(SABlockParams(
            heads=heads,
            w_o=linear(d, d + 1, zero=zero_residual),
            ln1_gain=param(np.ones((1, d))),
            ln1_bias=param(np.zeros((1, d))),
            ln2_gain=param(np.ones((1, d))),
            ln2_bias=param(np.zeros((1, d))),
            ffn_w1=linear(cfg.d_ff, d + 1),
            ffn_w2=linear(d, cfg.d_ff + 1, zero=zero_residual),
        ))
    return ModelParams(
        subsample_proj=linear(d, stacked + 1),
        blocks=blocks,
        final_gain=param(np.ones((1, d))),
        final_bias=param(np.zeros((1, d))),
        w_out=linear(cfg.vocab_size, d + 1),
    )


def subsample(features, factor: int, proj: Tensor) -> Tensor:
    """Stack ``factor`` consecutive frames (zero-padded tail) and project.

    (T, F) -> (ceil(T/factor), d_model).
    """
    x = features if isinstance(features, Tensor) else const(np.asarray(features, dtype=float))
    if x.data.shape[0] < factor:
        raise ShortInputError(
            f"need at least {factor} frames to subsample, got {x.data.shape[0]}"
        )
    stacked = frame_stack(x, factor)
    return matmul(append_ones(stacked), transpose(proj))


def sa_block_forward(
    x: Tensor,
    block: SABlockParams,
    cfg: EncoderConfig,
    start_index: int = 0,
    capture: list | None = None,
) -> Tensor:
    """Pre-norm residual block: x + MHA(LN(x)), then y + FFN(LN(y))."""
    h = layer_norm_rows(x, block.ln1_gain, block.ln1_bias)
    mha = multi_head_attention(h, block.heads, block.w_o, cfg.variant,
                               alpha=cfg.alpha, start_index=start_index, capture=capture)
    y = add(x, mha)
    h2 = layer_norm_rows(y, block.ln2_gain, block.ln2_bias)
    hidden = relu(matmul(append_ones(h2), transpose(block.ffn_w1)))
    ffn = matmul(append_ones(hidden), transpose(block.ffn_w2))
    return add(y, ffn)


def encoder_forward(
    features,
    params: ModelParams,
    cfg: EncoderConfig,
    start_index: int = 0,
    capture: list[list[np.ndarray]] | None = None,
) -> Tensor:
    """Features (T, feat_dim) -> token logits (ceil(T/factor), vocab_size)."""
    x = subsample(features, cfg.subsample_factor, params.subsample_proj)
    if cfg.abs_pe_enabled:
        x = add(x, const(sinusoid_encoding(x.data.shape[0], cfg.d_model)))
    for block in params.blocks:
        block_capture: list | None = [] if capture is not None else None
        x = sa_block_forward(x, block, cfg, start_index=start_index, capture=block_capture)
        if capture is not None:
            capture.append(block_capture)
    x = layer_norm_rows(x, params.final_gain, params.final_bias)
    return matmul(append_ones(x), transpose(params.w_out))


# ---------------------------------------------------------------------------
# checkpoint io
# ---------------------------------------------------------------------------


def save_checkpoint(path, model: TrainedModel) -> None:
    meta = {
        "format": CHECKPOINT_FORMAT,
        "encoder": model.config.to_dict(),
        "training": model.meta,
    }
    arrays = [(name, t.data) for name, t in model.params.named()]
    write_container(path, meta, arrays)


def load_checkpoint(path) -> TrainedModel:
    meta, arrays = read_container(path)
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    cfg = EncoderConfig.from_dict(meta["encoder"])
    params = init_model(cfg, seed=0)
    named = dict(params.named())
    if set(named) != set(arrays):
        missing = sorted(set(named) ^ set(arrays))
        raise ConfigError(f"{path}: parameter names do not match config: {missing}")
    for name, tensor in named.items():
        if tensor.data.shape != arrays[name].shape:
            raise ConfigError(
                f"{path}: shape mismatch for {name}: "
                f"{arrays[name].shape} vs expected {tensor.data.shape}"
            )
        tensor.data[...] = arrays[name]
        tensor.zero_grad()
    return TrainedModel(config=cfg, params=params, meta=meta.get("training", {}))


def parameter_count(params: ModelParams) -> int:
    return sum(t.data.size for t in params.tensors())
