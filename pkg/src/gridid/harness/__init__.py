"""Experiment orchestration, scoring and result persistence."""
from .config import METHODS, ConfigError, ExperimentConfig, ResultRecord
from .experiments import (Curve, FitOutput, TransferResult, datasets_for, fit_dataset,
                          iterations_to_target, run_cell, run_cells, run_comparison,
                          run_prior_sweep, run_sample_sweep, run_transfer, trajectory_for)
from .metrics import MAPE_FLOOR, Reconstruction, dataset_mape, mape, reconstruct, reconstruct_batch

__all__ = [
    "ConfigError", "Curve", "ExperimentConfig", "FitOutput", "MAPE_FLOOR", "METHODS",
    "Reconstruction", "ResultRecord", "TransferResult", "dataset_mape", "datasets_for",
    "fit_dataset", "iterations_to_target", "mape", "reconstruct", "reconstruct_batch",
    "run_cell", "run_cells", "run_comparison", "run_prior_sweep", "run_sample_sweep",
    "run_transfer", "trajectory_for",
]
