"""Scalar loss and penalty functions.

All functions build on the autodiff graph so their gradients reach the
network parameters. Each returns a :class:`LossValue` carrying the graph
node plus a kind tag; ``float(loss)`` or ``loss.value`` gives the number.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ShapeError, Tensor

__all__ = [
    "LossValue",
    "PROB_EPS",
    "reconstruction_loss",
    "discriminator_loss",
    "generator_adv_loss",
    "classification_loss",
    "l1_penalty",
    "l2_penalty",
    "combined_objective",
    "optimal_discriminator",
]

# Probabilities are clamped to this range before logs so the adversarial
# losses stay finite at the {0,1} endpoints.
PROB_EPS = 1e-7


@dataclass
class LossValue:
    tensor: Tensor
    kind: str

    @property
    def value(self):
        return float(self.tensor.data)

    def __float__(self):
        return self.value

    def backward(self):
        self.tensor.backward()


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _batch_size(t):
    return t.shape[0] if t.data.ndim > 1 else 1


def reconstruction_loss(x, x_rec):
    """Mean over the batch of the per-sample squared L2 distance."""
    x, x_rec = _as_tensor(x), _as_tensor(x_rec)
    if x.shape != x_rec.shape:
        raise ShapeError(f"reconstruction shapes differ: {x.shape} vs {x_rec.shape}")
    m = _batch_size(x)
    total = (x - x_rec).square().sum()
    return LossValue(total * (1.0 / m), "reconstruction")


def discriminator_loss(d_real, d_fake):
    """-(1/m)·Σ[log D(z') + log(1 - D(z))]; 0 at perfect discrimination."""
    d_real, d_fake = _as_tensor(d_real), _as_tensor(d_fake)
    m = max(d_real.data.size, 1)
    if d_real.data.size == 0 or d_fake.data.size == 0:
        raise ValueError("discriminator_loss needs a non-empty batch")
    term = d_real.clamp(PROB_EPS, 1.0 - PROB_EPS).log().sum() + \
        (1.0 - d_fake).clamp(PROB_EPS, 1.0 - PROB_EPS).log().sum()
    return LossValue(term * (-1.0 / m), "discriminator")


def generator_adv_loss(d_fake):
    """-(1/m)·Σ log D(z); 0 when the discriminator is fully fooled."""
    d_fake = _as_tensor(d_fake)
    if d_fake.data.size == 0:
        raise ValueError("generator_adv_loss needs a non-empty batch")
    m = d_fake.data.size if d_fake.data.ndim <= 1 else d_fake.shape[0]
    total = d_fake.clamp(PROB_EPS, 1.0 - PROB_EPS).log().sum()
    return LossValue(total * (-1.0 / m), "generator_adv")


def classification_loss(y_one_hot, logits):
    """Mean over the batch of squared L2 between prediction and one-hot label."""
    y, f = _as_tensor(y_one_hot), _as_tensor(logits)
    if y.shape != f.shape:
        raise ShapeError(f"label shape {y.shape} vs prediction shape {f.shape}")
    rows = np.atleast_2d(y.data)
    if not (np.all((rows == 0) | (rows == 1)) and np.all(rows.sum(axis=1) == 1)):
        raise ValueError("labels must be one-hot rows")
    m = _batch_size(y)
    total = (f - y).square().sum()
    return LossValue(total * (1.0 / m), "classification")


def l1_penalty(params):
    """Σ|θ| over the given parameter tensors."""
    total = None
    for p in params:
        term = _as_tensor(p).abs().sum()
        total = term if total is None else total + term
    if total is None:
        total = Tensor(0.0)
    return LossValue(total, "l1")


def l2_penalty(params):
    """Σθ² over the given parameter tensors."""
    total = None
    for p in params:
        term = _as_tensor(p).square().sum()
        total = term if total is None else total + term
    if total is None:
        total = Tensor(0.0)
    return LossValue(total, "l2")


def combined_objective(data_loss, penalty, lam):
    """data_loss + λ·penalty; λ=0 returns the data loss node unchanged."""
    if lam < 0:
        raise ValueError(f"regularization weight must be non-negative, got {lam}")
    if lam == 0:
        return LossValue(data_loss.tensor, data_loss.kind)
    return LossValue(data_loss.tensor + penalty.tensor * float(lam), data_loss.kind)


def optimal_discriminator(p_density, q_density):
    """Reference optimum p/(p+q); used only as a test oracle."""
    if p_density < 0 or q_density < 0:
        raise ValueError("densities must be non-negative")
    if p_density == 0 and q_density == 0:
        raise ValueError("densities cannot both be zero")
    return p_density / (p_density + q_density)
