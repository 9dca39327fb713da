"""Greedy-decoding evaluation, length buckets, and the length-mismatch sweep."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..ctc import edit_distance, greedy_decode
from ..encoder import TrainedModel, encoder_forward
from ..errors import ConfigError
from .synth import Dataset, concat_eval

log = logging.getLogger("longattn")

DEFAULT_BUCKET_EDGES = (0, 50, 100, 200, 400, 800, 1600)


@dataclass
class ReportRow:
    eval_set: str
    bucket: str
    n_utterances: int
    ref_tokens: int
    edit_distance: int
    token_error_rate: float


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    config_hash: str = ""
    checkpoint: str = ""
    seed: int | None = None
    wall_clock_s: float = 0.0  # informational; kept out of the CSV artifact


def decode_utterance(model: TrainedModel, features: np.ndarray,
                     max_frames: int | None = None) -> list[int]:
    """Greedy-decode one utterance, splitting in half above the frame budget.

    Split points land on subsampling boundaries so the halves decode exactly
    as their frames would; each split is logged.
    """
    factor = model.config.subsample_factor
    t = features.shape[0]
    if max_frames is not None and t > max_frames and t >= 2 * factor:
        mid = (t // 2) // factor * factor
        if mid >= factor and t - mid >= factor:
            log.info("splitting %d-frame utterance at frame %d (budget %d)",
                     t, mid, max_frames)
            return (decode_utterance(model, features[:mid], max_frames)
                    + decode_utterance(model, features[mid:], max_frames))
    logits = encoder_forward(features, model.params, model.config)
    return greedy_decode(logits.data)


def _bucket_label(edges: tuple[int, ...], idx: int) -> str:
    if idx + 1 < len(edges):
        return f"{edges[idx]}-{edges[idx + 1]}"
    return f"{edges[idx]}+"


def evaluate(
    model: TrainedModel,
    eval_sets: dict[str, Dataset],
    config_hash: str = "",
    checkpoint: str = "",
    seed: int | None = None,
    bucket_edges: tuple[int, ...] = DEFAULT_BUCKET_EDGES,
    max_frames: int | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Greedy-decode every utterance; aggregate corpus-level error per length bucket."""
    started = time.perf_counter()
    vocab = model.config.vocab_size
    rows: list[ReportRow] = []
    for name, dataset in eval_sets.items():
        for utt in dataset:
            for t in utt.labels:
                if not (1 <= t < vocab):
                    raise ConfigError(
                        f"eval set {name!r} has token {t} outside the checkpoint "
                        f"vocabulary [1, {vocab - 1}]"
                    )
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                hyps = list(pool.map(
                    lambda u: decode_utterance(model, u.features, max_frames),
                    dataset.utterances))
        else:
            hyps = [decode_utterance(model, u.features, max_frames) for u in dataset]
        # ordered reduction into buckets keyed by raw feature length
        n_buckets = len(bucket_edges)
        counts = [0] * n_buckets
        tokens = [0] * n_buckets
        dists = [0] * n_buckets
        for utt, hyp in zip(dataset.utterances, hyps):
            t = utt.features.shape[0]
            idx = n_buckets - 1
            for b in range(n_buckets - 1):
                if bucket_edges[b] <= t < bucket_edges[b + 1]:
                    idx = b
                    break
            counts[idx] += 1
            tokens[idx] += len(utt.labels)
            dists[idx] += edit_distance(hyp, utt.labels)
        for b in range(n_buckets):
            if counts[b] == 0:
                continue
            rows.append(ReportRow(name, _bucket_label(bucket_edges, b), counts[b],
                                  tokens[b], dists[b],
                                  dists[b] / tokens[b] if tokens[b] else 0.0))
        total_tokens = sum(tokens)
        rows.append(ReportRow(name, "all", sum(counts), total_tokens, sum(dists),
                              sum(dists) / total_tokens if total_tokens else 0.0))
    return ExperimentReport(rows=rows, config_hash=config_hash, checkpoint=checkpoint,
                            seed=seed, wall_clock_s=time.perf_counter() - started)


def overall_error(report: ExperimentReport, eval_set: str) -> float:
    for row in report.rows:
        if row.eval_set == eval_set and row.bucket == "all":
            return row.token_error_rate
    raise ConfigError(f"report has no eval set {eval_set!r}")


def write_report_csv(report: ExperimentReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={report.config_hash} checkpoint={report.checkpoint} "
                 f"seed={report.seed}\n")
        fh.write("eval_set,bucket,n_utterances,ref_tokens,edit_distance,token_error_rate\n")
        for r in report.rows:
            fh.write(f"{r.eval_set},{r.bucket},{r.n_utterances},{r.ref_tokens},"
                     f"{r.edit_distance},{r.token_error_rate:.17g}\n")


# ---------------------------------------------------------------------------
# length sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepRow:
    variant: str
    k: int
    seed: str  # seed value or "mean"
    n_utterances: int
    token_error_rate: float


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)
    config_hash: str = ""


def run_length_sweep(
    models: dict[str, TrainedModel],
    heldout: Dataset,
    lengths: list[int],
    seeds: list[int],
    config_hash: str = "",
    max_frames: int | None = None,
    workers: int = 1,
) -> SweepResult:
    """Error rate per (variant, concatenation factor), averaged over eval seeds."""
    result = SweepResult(config_hash=config_hash)
    for variant, model in models.items():
        for k in lengths:
            per_seed = []
            for seed in seeds:
                eval_set = concat_eval(heldout, k, seed=seed)
                report = evaluate(model, {"sweep": eval_set}, config_hash=config_hash,
                                  seed=seed, max_frames=max_frames, workers=workers)
                ter = overall_error(report, "sweep")
                result.rows.append(SweepRow(variant, k, str(seed), len(eval_set), ter))
                per_seed.append(ter)
            result.rows.append(SweepRow(variant, k, "mean", len(eval_set),
                                        float(np.mean(per_seed))))
            log.info("sweep %s k=%d mean error %.4f", variant, k, np.mean(per_seed))
    return result


def sweep_mean(result: SweepResult, variant: str, k: int) -> float:
    for row in result.rows:
        if row.variant == variant and row.k == k and row.seed == "mean":
            return row.token_error_rate
    raise ConfigError(f"sweep has no mean row for {variant!r} k={k}")


def write_sweep_csv(result: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# config_hash={result.config_hash}\n")
        fh.write("variant,k,seed,n_utterances,token_error_rate\n")
        for r in result.rows:
            fh.write(f"{r.variant},{r.k},{r.seed},{r.n_utterances},"
                     f"{r.token_error_rate:.17g}\n")
