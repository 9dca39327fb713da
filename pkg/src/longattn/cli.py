"""Experiment command line.

Subcommands: gen-data, train, eval, sweep, heatmap, memcheck. Configuration
comes from one JSON file plus ``--set section.key=value`` overrides; every
output path is explicit. Exit codes: 0 success, 2 configuration error,
3 runtime or divergence error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import traceback

from .attention.params import AttentionVariant
from .encoder import TrainedModel, load_checkpoint, save_checkpoint
from .errors import ConfigError, LongattnError
from .harness.configio import config_hash, load_config
from .harness.evaluation import evaluate, run_length_sweep, write_report_csv, write_sweep_csv
from .harness.heatmap import dump_heatmap
from .harness.memory import memory_footprint_estimate, write_memory_csv
from .harness.synth import concat_eval, gen_dataset, heldout_task, load_dataset, save_dataset
from .harness.training import train_model, write_curve_csv

log = logging.getLogger("longattn")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from None


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="JSON config file (defaults used when absent)")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override one config value")


def _load(args) -> tuple:
    cfg = load_config(args.config, args.overrides)
    return cfg, config_hash(cfg)


def _heldout_dataset(cfg):
    return gen_dataset(heldout_task(cfg.task, cfg.eval.seed, cfg.eval.n_utterances))


def cmd_gen_data(args) -> int:
    cfg, digest = _load(args)
    dataset = gen_dataset(cfg.task)
    save_dataset(args.out, dataset)
    frames = sum(u.features.shape[0] for u in dataset)
    log.info("wrote %d utterances (%d frames) to %s [config %s]",
             len(dataset), frames, args.out, digest)
    return 0


def cmd_train(args) -> int:
    if args.variant is not None:
        args.overrides = list(args.overrides) + [f"model.variant={args.variant}"]
    for name in ("steps", "lr", "seed"):
        value = getattr(args, name)
        if value is not None:
            args.overrides.append(f"train.{name}={value}")
    cfg, digest = _load(args)
    dataset = None
    if args.data is not None:
        dataset = load_dataset(args.data)
        if dataset.task is not None and dataset.task.to_dict() != cfg.task.to_dict():
            raise ConfigError(f"dataset {args.data} was generated from a different task config")
    result = train_model(cfg.model, cfg.task, cfg.train.steps, cfg.train.lr,
                         cfg.train.seed, dataset=dataset)
    result.model.meta["config_hash"] = digest
    save_checkpoint(args.out, result.model)
    if args.curve is not None:
        write_curve_csv(args.curve, result.curve, digest)
    log.info("trained %s for %d steps in %.1fs, final loss %.4f -> %s",
             cfg.model.variant.value, cfg.train.steps, result.wall_clock_s,
             result.curve[-1] if result.curve else float("nan"), args.out)
    return 0


def _load_model(path) -> TrainedModel:
    try:
        return load_checkpoint(path)
    except FileNotFoundError:
        raise ConfigError(f"checkpoint not found: {path}") from None


def cmd_eval(args) -> int:
    cfg, digest = _load(args)
    model = _load_model(args.checkpoint)
    heldout = _heldout_dataset(cfg)
    eval_set = concat_eval(heldout, args.concat_k, seed=args.eval_seed)
    report = evaluate(model, {f"concat{args.concat_k}": eval_set},
                      config_hash=digest, checkpoint=str(args.checkpoint),
                      seed=args.eval_seed, bucket_edges=cfg.eval.bucket_edges,
                      max_frames=cfg.eval.max_frames, workers=cfg.eval.workers)
    write_report_csv(report, args.out)
    for row in report.rows:
        log.info("%s %s: %d utts, error %.4f", row.eval_set, row.bucket,
                 row.n_utterances, row.token_error_rate)
    log.info("report -> %s (%.1fs)", args.out, report.wall_clock_s)
    return 0


def cmd_sweep(args) -> int:
    cfg, digest = _load(args)
    specs = {}
    for item in args.checkpoint:
        if "=" not in item:
            raise ConfigError(f"--checkpoint takes VARIANT=PATH, got {item!r}")
        name, path = item.split("=", 1)
        AttentionVariant.parse(name)
        specs[name] = path
    missing = [f"{name}={path}" for name, path in specs.items()
               if not _exists(path)]
    if missing:
        raise ConfigError("missing checkpoints: " + ", ".join(missing))
    models = {}
    for name, path in specs.items():
        model = _load_model(path)
        if model.config.variant.value != name:
            raise ConfigError(
                f"checkpoint {path} holds variant {model.config.variant.value!r}, "
                f"labelled {name!r}"
            )
        models[name] = model
    heldout = _heldout_dataset(cfg)
    result = run_length_sweep(models, heldout, _int_list(args.lengths),
                              _int_list(args.seeds), config_hash=digest,
                              max_frames=cfg.eval.max_frames, workers=cfg.eval.workers)
    write_sweep_csv(result, args.out)
    log.info("sweep -> %s", args.out)
    return 0


def _exists(path) -> bool:
    try:
        with open(path, "rb"):
            return True
    except OSError:
        return False


def cmd_heatmap(args) -> int:
    cfg, digest = _load(args)
    model = _load_model(args.checkpoint)
    heldout = _heldout_dataset(cfg)
    eval_set = concat_eval(heldout, args.concat_k, seed=args.eval_seed)
    if not (0 <= args.utterance < len(eval_set)):
        raise ConfigError(f"utterance {args.utterance} out of range [0, {len(eval_set)})")
    features = eval_set.utterances[args.utterance].features
    attn = dump_heatmap(model, features, args.layer, args.head, args.out_prefix,
                        config_hash=digest)
    log.info("heatmap %dx%d -> %s.csv / %s.pgm", attn.shape[0], attn.shape[1],
             args.out_prefix, args.out_prefix)
    return 0


def cmd_memcheck(args) -> int:
    cfg, digest = _load(args)
    if args.variants == "all":
        variants = list(AttentionVariant)
    else:
        variants = [AttentionVariant.parse(v) for v in args.variants.split(",") if v]
    rows = []
    for variant in variants:
        for length in _int_list(args.lengths):
            rows.append(memory_footprint_estimate(variant, length, cfg.model))
    if args.out:
        write_memory_csv(rows, args.out, config_hash=digest)
    for r in rows:
        log.info("%-22s L=%-5d analytic=%-10d measured=%d",
                 r.variant, r.length, r.analytic, r.measured)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="longattn",
                                     description="attention length-mismatch experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    _common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one variant and write a checkpoint")
    _common(p)
    p.add_argument("--variant", default=None,
                   choices=[v.value for v in AttentionVariant])
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--data", default=None, help="pre-generated dataset file")
    p.add_argument("--curve", default=None, help="write the loss curve CSV here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on concatenated held-out data")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--concat-k", type=int, default=1)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="error-vs-length sweep over trained checkpoints")
    _common(p)
    p.add_argument("--checkpoint", action="append", required=True,
                   metavar="VARIANT=PATH")
    p.add_argument("--lengths", default="1,8,16")
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("heatmap", help="dump one head's attention matrix")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--head", type=int, required=True)
    p.add_argument("--utterance", type=int, default=0)
    p.add_argument("--concat-k", type=int, default=1)
    p.add_argument("--eval-seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("memcheck", help="attention-path memory accounting")
    _common(p)
    p.add_argument("--lengths", default="64,128,256,512")
    p.add_argument("--variants", default="all")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_memcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except LongattnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Exception:  # runtime contract: anything unexpected is exit 3
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
