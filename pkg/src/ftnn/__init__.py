"""Fault-tolerance workbench for neural networks: two-phase adversarial
training, L1/L2 baselines, and stuck-at-0 fault injection."""

from .autodiff import Tensor, ShapeError, GraphError
from .data import Dataset
from .estimator import FaultTolerantClassifier
from .faults import FaultMask, gen_mask, apply_mask, epsilon_ft, degradation_sweep
from .metrics import MetricsRecord, accuracy, generalization_error
from .networks import (
    Network,
    build_feature_extractor,
    build_classifier_head,
    build_generator,
    build_discriminator,
    compose,
    save_checkpoint,
    load_checkpoint,
)
from .training import TrainConfig, TrainLog, run_pipeline, train_baseline

__version__ = "0.1.0"

__all__ = [
    "Tensor", "ShapeError", "GraphError", "Dataset", "FaultTolerantClassifier",
    "FaultMask", "gen_mask", "apply_mask", "epsilon_ft", "degradation_sweep",
    "MetricsRecord", "accuracy", "generalization_error", "Network",
    "build_feature_extractor", "build_classifier_head", "build_generator",
    "build_discriminator", "compose", "save_checkpoint", "load_checkpoint",
    "TrainConfig", "TrainLog", "run_pipeline", "train_baseline",
]
