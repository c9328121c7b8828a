"""Scikit-learn style estimator wrapping the fault-tolerant trainer.

Lets the training pipeline compose with sklearn tooling (grid search,
pipelines, cross-validation) through the usual fit/predict/get_params
surface. Inputs are image batches (N, C, H, W) or flat feature matrices.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import faults, metrics
from .data import Dataset
from .training import TrainConfig, run_pipeline

__all__ = ["FaultTolerantClassifier"]


def _check_inputs(X, y=None):
    X = np.asarray(X, dtype=np.float32)
    if X.ndim == 2:
        X = X.reshape(X.shape[0], 1, 1, X.shape[1])
    if X.ndim != 4:
        raise ValueError(f"X must be (N, features) or (N, C, H, W); got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("X contains NaN or Inf")
    if y is None:
        return X, None
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(X):
        raise ValueError(f"y must be 1-d with {len(X)} entries; got shape {y.shape}")
    return X, y.astype(np.int64)


class FaultTolerantClassifier(ClassifierMixin, BaseEstimator):
    """Image classifier trained with one of the fault-tolerance methods.

    method 'adversarial' runs the two-phase schedule (unsupervised
    reconstruction/minimax games, then supervised fine-tuning); 'none',
    'lasso' and 'tikhonov' train a single supervised phase with the
    corresponding penalty weighted by `lam`.
    """

    def __init__(self, arch="a1_mini", method="adversarial", lam=0.0,
                 latent_dim=32, minibatch=32, epochs_phase1=5, epochs_phase2=10,
                 lr_fe=0.002, lr_gen=0.002, lr_cls=0.002, lr_disc=5e-5,
                 disc_hidden=512, disc_dropout=0.3, seed=0):
        self.arch = arch
        self.method = method
        self.lam = lam
        self.latent_dim = latent_dim
        self.minibatch = minibatch
        self.epochs_phase1 = epochs_phase1
        self.epochs_phase2 = epochs_phase2
        self.lr_fe = lr_fe
        self.lr_gen = lr_gen
        self.lr_cls = lr_cls
        self.lr_disc = lr_disc
        self.disc_hidden = disc_hidden
        self.disc_dropout = disc_dropout
        self.seed = seed

    def _config(self):
        return TrainConfig(
            seed=self.seed, minibatch=self.minibatch,
            epochs_phase1=self.epochs_phase1, epochs_phase2=self.epochs_phase2,
            lr_fe=self.lr_fe, lr_gen=self.lr_gen, lr_cls=self.lr_cls,
            lr_disc=self.lr_disc, lam=self.lam, latent_dim=self.latent_dim,
            disc_hidden=self.disc_hidden, disc_dropout=self.disc_dropout,
            method=self.method,
        ).validate()

    def fit(self, X, y):
        X, y = _check_inputs(X, y)
        self.classes_ = np.unique(y)
        data = Dataset(X, y, "train", classes=int(self.classes_.max()) + 1)
        result = run_pipeline(self._config(), self.arch, data)
        self.network_ = result["network"]
        self.train_log_ = result["log"]
        return self

    def predict(self, X):
        self._check_fitted()
        X, _ = _check_inputs(X)
        return metrics.predict_labels(self.network_.forward, X)

    def decision_function(self, X):
        self._check_fitted()
        X, _ = _check_inputs(X)
        return self.network_.forward(X).data

    def degradation_curve(self, X, y, kind="weight", fractions=(0.0, 0.2, 0.4, 0.6),
                          trials=5, seed=0):
        """Accuracy-vs-fault-fraction curve for the fitted network."""
        self._check_fitted()
        X, y = _check_inputs(X, y)
        data = Dataset(X, y, "test", classes=int(self.classes_.max()) + 1)
        return faults.degradation_sweep(self.network_, kind, list(fractions),
                                        trials, data, seed)

    def _check_fitted(self):
        if not hasattr(self, "network_"):
            raise RuntimeError("estimator is not fitted; call fit(X, y) first")
