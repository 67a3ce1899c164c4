"""Experiment harness: configs, training, cross-validation, checkpoints, statistics, CLI."""
from .checkpoint import config_hash, load_checkpoint, load_into_model, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .crossval import aggregate, compare, crossval, read_report, write_report
from .stats import MannWhitneyResult, mann_whitney_u
from .training import TrainingDiverged, evaluate, fit_and_evaluate, train_supervised

__all__ = [
    "ConfigError", "MannWhitneyResult", "RunConfig", "TrainingDiverged", "aggregate", "compare",
    "config_hash", "crossval", "evaluate", "fit_and_evaluate", "load_checkpoint", "load_config",
    "load_into_model", "mann_whitney_u", "read_report", "save_checkpoint", "train_supervised",
    "write_report",
]
