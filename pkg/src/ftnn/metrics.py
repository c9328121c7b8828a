"""Accuracy, generalization error, parameter statistics and CSV reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricsRecord",
    "accuracy",
    "predict_labels",
    "generalization_error",
    "param_distribution_stats",
    "emit_report",
    "parse_comparison_csv",
    "COMPARISON_FIELDS",
]

COMPARISON_FIELDS = ["method", "arch", "seed", "train_acc", "test_acc", "gen_error", "param_std"]
CURVE_FIELDS = ["fault_kind", "fraction", "mean_accuracy", "std_accuracy", "epsilon_max"]

EVAL_CHUNK = 256


@dataclass
class MetricsRecord:
    method: str
    arch: str
    seed: int
    train_accuracy: float  # percent
    test_accuracy: float  # percent
    param_mean: float
    param_std: float

    @property
    def generalization_error(self):
        return self.train_accuracy - self.test_accuracy

    def row(self):
        return {
            "method": self.method,
            "arch": self.arch,
            "seed": self.seed,
            "train_acc": f"{self.train_accuracy:.2f}",
            "test_acc": f"{self.test_accuracy:.2f}",
            "gen_error": f"{self.generalization_error:.2f}",
            "param_std": f"{self.param_std:.6f}",
        }


def predict_labels(forward, images):
    """Argmax class per sample; ties break toward the lowest class index."""
    preds = []
    for start in range(0, len(images), EVAL_CHUNK):
        logits = forward(images[start:start + EVAL_CHUNK])
        data = logits.data if hasattr(logits, "data") else np.asarray(logits)
        preds.append(np.argmax(data, axis=1))
    return np.concatenate(preds) if preds else np.empty(0, dtype=int)


def accuracy(net, dataset):
    """Classification accuracy in percent over a labeled dataset."""
    if len(dataset) == 0:
        raise ValueError("accuracy needs a non-empty dataset")
    preds = predict_labels(net.forward, dataset.images)
    return float(np.mean(preds == dataset.labels) * 100.0)


def generalization_error(r_train, r_test):
    """Train accuracy minus test accuracy, both in percent."""
    return r_train - r_test


def param_distribution_stats(net, bins=50):
    """Population mean/std and histogram over weight entries (biases excluded)."""
    values = np.concatenate([w.data.ravel() for w in net.weights()])
    if values.size == 0:
        raise ValueError("network has no weight parameters")
    counts, edges = np.histogram(values, bins=bins)
    return {
        "mean": float(values.mean()),
        "std": float(values.std()),  # population (divide-by-N)
        "histogram": (counts, edges),
        "count": int(values.size),
    }


def emit_report(records, curves, path):
    """Write the method-comparison CSV; identical inputs give identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=COMPARISON_FIELDS, lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.row())
    if curves:
        curve_path = str(path).rsplit(".", 1)[0] + "_curves.csv"
        with open(curve_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CURVE_FIELDS)
            for curve in curves:
                for row in curve.summary_rows():
                    writer.writerow(row)


def parse_comparison_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != COMPARISON_FIELDS:
            raise ValueError(f"unexpected comparison schema {reader.fieldnames} in {path}")
        return list(reader)
