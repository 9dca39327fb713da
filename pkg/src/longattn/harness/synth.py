"""Synthetic prototype-emission task: a desk-scale stand-in for segmented
speech corpora.

Each non-blank token owns a unit-norm prototype vector; an utterance emits a
random-duration run of each token's prototype plus Gaussian noise. Half of
the tokens are built as perturbed partners of the other half, so some pairs
are only reliably separable by pooling over a run - that is what makes
attention quality visible in the error rate.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Iterator

import numpy as np

from ..container import read_container, write_container
from ..errors import ConfigError

DATASET_FORMAT = "longattn-dataset-v1"

# orthogonal tilt applied to partner prototypes; chord distance to the anchor
# is 2*sin(atan(blend)/2), ~0.30 here. Close enough that single subsampled
# frames cannot separate a pair reliably at the default noise, so models must
# pool evidence across the token's run.
PARTNER_BLEND = 0.31


@dataclass
class SyntheticTaskConfig:
    vocab_size: int = 12  # includes blank id 0
    feat_dim: int = 8
    frames_per_token: tuple[int, int] = (10, 16)
    noise: float = 0.2
    tokens_per_utterance: tuple[int, int] = (4, 8)
    # near-zero "pause" frames surrounding every token run, the natural home
    # for CTC blanks
    silence_frames: tuple[int, int] = (4, 8)
    n_utterances: int = 600
    seed: int = 7
    # prototypes follow ``seed`` unless pinned here; held-out splits pin this
    # so they share the training prototypes while redrawing utterances
    prototype_seed: int | None = None

    def __post_init__(self):
        self.frames_per_token = tuple(self.frames_per_token)
        self.tokens_per_utterance = tuple(self.tokens_per_utterance)
        self.silence_frames = tuple(self.silence_frames)
        if self.vocab_size < 2:
            raise ConfigError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.feat_dim < 1 or self.n_utterances < 1:
            raise ConfigError("feat_dim and n_utterances must be positive")
        if self.noise < 0:
            raise ConfigError(f"noise must be non-negative, got {self.noise}")
        for name, (lo, hi) in (("frames_per_token", self.frames_per_token),
                               ("tokens_per_utterance", self.tokens_per_utterance)):
            if not (1 <= lo <= hi):
                raise ConfigError(f"{name} range must satisfy 1 <= min <= max, got {lo}..{hi}")
        s_lo, s_hi = self.silence_frames
        if not (0 <= s_lo <= s_hi):
            raise ConfigError(f"silence_frames range must satisfy 0 <= min <= max, got {s_lo}..{s_hi}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frames_per_token"] = list(self.frames_per_token)
        d["tokens_per_utterance"] = list(self.tokens_per_utterance)
        d["silence_frames"] = list(self.silence_frames)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticTaskConfig":
        return cls(**d)


@dataclass
class Utterance:
    features: np.ndarray  # (T, feat_dim)
    labels: list[int]


@dataclass
class Dataset:
    utterances: list[Utterance]
    prototypes: np.ndarray  # (vocab_size - 1, feat_dim), row t-1 for token t
    task: SyntheticTaskConfig | None = field(repr=False, default=None)

    def __len__(self) -> int:
        return len(self.utterances)

    def __iter__(self) -> Iterator[Utterance]:
        return iter(self.utterances)


def token_prototypes(cfg: SyntheticTaskConfig) -> np.ndarray:
    """Unit-norm prototypes; the back half are perturbed partners of the front half.

    Partners are built by tilting an anchor along an orthogonal direction, so
    every pair sits at the same controlled distance regardless of seed.
    """
    proto_seed = cfg.seed if cfg.prototype_seed is None else cfg.prototype_seed
    rng = np.random.default_rng([proto_seed, 0x70])
    n_tokens = cfg.vocab_size - 1
    raw = rng.normal(size=(n_tokens, cfg.feat_dim))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    half = n_tokens // 2
    for i in range(half, n_tokens):
        anchor = raw[i - half]
        ortho = raw[i] - (raw[i] @ anchor) * anchor
        norm = np.linalg.norm(ortho)
        if norm < 1e-9:  # degenerate draw; any orthogonal direction works
            ortho = np.zeros(cfg.feat_dim)
            ortho[int(np.argmin(np.abs(anchor)))] = 1.0
            ortho -= (ortho @ anchor) * anchor
            norm = np.linalg.norm(ortho)
        tilted = anchor + PARTNER_BLEND * ortho / norm
        raw[i] = tilted / np.linalg.norm(tilted)
    return raw


def gen_dataset(cfg: SyntheticTaskConfig) -> Dataset:
    """Sample ``n_utterances`` token sequences and their noisy emissions.

    Deterministic in ``cfg.seed``: same config, bit-identical dataset.
    """
    prototypes = token_prototypes(cfg)
    rng = np.random.default_rng([cfg.seed, 0x75])
    t_lo, t_hi = cfg.tokens_per_utterance
    d_lo, d_hi = cfg.frames_per_token
    s_lo, s_hi = cfg.silence_frames
    utterances = []
    for _ in range(cfg.n_utterances):
        n_tok = int(rng.integers(t_lo, t_hi + 1))
        tokens = rng.integers(1, cfg.vocab_size, size=n_tok)
        durations = rng.integers(d_lo, d_hi + 1, size=n_tok)
        gaps = rng.integers(s_lo, s_hi + 1, size=n_tok + 1)
        pieces = [np.zeros((gaps[0], cfg.feat_dim))]
        for tok, dur, gap in zip(tokens, durations, gaps[1:]):
            pieces.append(np.repeat(prototypes[tok - 1][None, :], dur, axis=0))
            pieces.append(np.zeros((gap, cfg.feat_dim)))
        clean = np.concatenate(pieces, axis=0)
        noise = rng.normal(0.0, cfg.noise, size=clean.shape) if cfg.noise > 0 else 0.0
        utterances.append(Utterance(features=clean + noise, labels=[int(t) for t in tokens]))
    return Dataset(utterances=utterances, prototypes=prototypes, task=cfg)


def concat_eval(dataset: Dataset, k: int, seed: int) -> Dataset:
    """Long-utterance evaluation set: shuffle, then concatenate runs of ``k``.

    With k=1 this is a permutation of the source. Features and labels are
    concatenated; leftover utterances (when k does not divide the size) drop.
    """
    if k < 1:
        raise ConfigError(f"concatenation factor must be >= 1, got {k}")
    if k > len(dataset):
        raise ConfigError(
            f"concatenation factor {k} exceeds dataset size {len(dataset)}"
        )
    rng = np.random.default_rng([seed, 0x63, k])
    order = rng.permutation(len(dataset))
    utterances = []
    for g in range(len(dataset) // k):
        chunk = [dataset.utterances[i] for i in order[g * k:(g + 1) * k]]
        utterances.append(Utterance(
            features=np.concatenate([u.features for u in chunk], axis=0),
            labels=[t for u in chunk for t in u.labels],
        ))
    return Dataset(utterances=utterances, prototypes=dataset.prototypes, task=dataset.task)


def save_dataset(path, dataset: Dataset) -> None:
    meta = {"format": DATASET_FORMAT, "task": dataset.task.to_dict() if dataset.task else None}
    arrays: list[tuple[str, np.ndarray]] = [("prototypes", dataset.prototypes)]
    for i, utt in enumerate(dataset.utterances):
        arrays.append((f"u{i:05d}.features", utt.features))
        arrays.append((f"u{i:05d}.labels", np.array([utt.labels], dtype=np.int64)))
    write_container(path, meta, arrays)


def load_dataset(path) -> Dataset:
    meta, arrays = read_container(path)
    if meta.get("format") != DATASET_FORMAT:
        raise ConfigError(f"{path}: not a {DATASET_FORMAT} file")
    task = SyntheticTaskConfig.from_dict(meta["task"]) if meta.get("task") else None
    utterances = []
    i = 0
    while f"u{i:05d}.features" in arrays:
        labels = [int(t) for t in arrays[f"u{i:05d}.labels"][0]]
        utterances.append(Utterance(features=arrays[f"u{i:05d}.features"], labels=labels))
        i += 1
    return Dataset(utterances=utterances, prototypes=arrays["prototypes"], task=task)


def heldout_task(cfg: SyntheticTaskConfig, seed: int, n_utterances: int) -> SyntheticTaskConfig:
    """Same distribution and prototypes, disjoint utterance stream."""
    proto_seed = cfg.seed if cfg.prototype_seed is None else cfg.prototype_seed
    return replace(cfg, seed=seed, n_utterances=n_utterances, prototype_seed=proto_seed)
