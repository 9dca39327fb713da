"""Experiment harness: synthetic data, training, evaluation sweeps, heatmaps,
and memory accounting."""

from .configio import EvalSettings, ExperimentConfig, config_hash, load_config
from .evaluation import (
    ExperimentReport,
    SweepResult,
    decode_utterance,
    evaluate,
    overall_error,
    run_length_sweep,
    sweep_mean,
    write_report_csv,
    write_sweep_csv,
)
from .heatmap import diagonal_mass, dump_heatmap, write_pgm
from .memory import MemoryFootprint, memory_footprint_estimate, write_memory_csv
from .synth import (
    Dataset,
    SyntheticTaskConfig,
    Utterance,
    concat_eval,
    gen_dataset,
    heldout_task,
    load_dataset,
    save_dataset,
    token_prototypes,
)
from .training import TrainResult, TrainSettings, loss_decreased, train_model, write_curve_csv

__all__ = [
    "Dataset",
    "EvalSettings",
    "ExperimentConfig",
    "ExperimentReport",
    "MemoryFootprint",
    "SweepResult",
    "SyntheticTaskConfig",
    "TrainResult",
    "TrainSettings",
    "Utterance",
    "concat_eval",
    "config_hash",
    "decode_utterance",
    "diagonal_mass",
    "dump_heatmap",
    "evaluate",
    "gen_dataset",
    "heldout_task",
    "load_config",
    "load_dataset",
    "loss_decreased",
    "memory_footprint_estimate",
    "overall_error",
    "run_length_sweep",
    "save_dataset",
    "sweep_mean",
    "token_prototypes",
    "train_model",
    "write_curve_csv",
    "write_memory_csv",
    "write_pgm",
    "write_report_csv",
    "write_sweep_csv",
]
