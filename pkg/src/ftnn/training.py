"""Two-phase adversarial training plus the regularized baselines.

Phase I alternates, per minibatch: (a) a joint descent step of the
feature extractor and generator on the reconstruction loss, (b) k
discriminator steps against prior samples with the extractor frozen,
and (c) one extractor step on the adversarial loss with the
discriminator frozen. Phase II fine-tunes extractor plus classifier
head on the supervised loss. Baselines train the same composite in a
single supervised phase with an optional L1/L2 penalty.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from . import losses, metrics, networks
from .autodiff import Tensor, sgd_step
from .data import minibatches

__all__ = [
    "TrainConfig",
    "TrainLog",
    "EpochRecord",
    "METHODS",
    "derive_seed",
    "sample_prior",
    "phase1_epoch",
    "phase2_finetune",
    "train_baseline",
    "run_pipeline",
]

METHODS = ("none", "lasso", "tikhonov", "adversarial")


@dataclass
class TrainConfig:
    seed: int = 0
    minibatch: int = 32
    epochs_phase1: int = 5
    epochs_phase2: int = 10
    disc_steps: int = 1  # k in the alternating game
    lr_fe: float = 0.002
    lr_gen: float = 0.002
    lr_cls: float = 0.002
    lr_disc: float = 5e-5
    lam: float = 0.0
    prior_mean: float = 0.0
    prior_std: float = 1.0
    latent_dim: int = 32
    disc_hidden: int = 512
    disc_dropout: float = 0.3
    method: str = "adversarial"
    freeze_fe_phase2: bool = False

    def validate(self):
        if self.minibatch < 1:
            raise ValueError("minibatch must be >= 1")
        if self.disc_steps < 1:
            raise ValueError("disc_steps must be >= 1")
        for name in ("lr_fe", "lr_gen", "lr_cls", "lr_disc"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.prior_std < 0:
            raise ValueError("prior_std must be non-negative")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        return self


@dataclass
class EpochRecord:
    phase: int
    epoch: int
    recon_loss: float = None
    disc_loss: float = None
    gen_adv_loss: float = None
    cls_loss: float = None
    train_acc: float = None
    test_acc: float = None


CSV_FIELDS = ["epoch", "recon_loss", "disc_loss", "gen_adv_loss", "cls_loss",
              "train_acc", "test_acc"]


@dataclass
class TrainLog:
    records: list = field(default_factory=list)

    def append(self, rec):
        self.records.append(rec)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_FIELDS)
            for i, rec in enumerate(self.records, 1):
                row = [i]
                for name in CSV_FIELDS[1:]:
                    v = getattr(rec, name)
                    row.append("" if v is None else f"{v:.6f}")
                writer.writerow(row)


def derive_seed(base, *key):
    """Deterministic child seed for a named stream."""
    return int(np.random.SeedSequence([int(base)] + [int(k) for k in key]).generate_state(1)[0])


_STREAM = {"fe_init": 1, "gen_init": 2, "disc_init": 3, "cls_init": 4,
           "shuffle": 5, "prior": 6, "dropout": 7}


def _rng(cfg, stream, *key):
    return np.random.default_rng(derive_seed(cfg.seed, _STREAM[stream], *key))


def sample_prior(cfg, m, rng=None):
    """m i.i.d. draws from N(prior_mean, prior_std² I) in latent space."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    z = rng.normal(cfg.prior_mean, cfg.prior_std, size=(m, cfg.latent_dim))
    return Tensor(z.astype(np.float32))


def _update(net, lr):
    params = list(net.params.values())
    sgd_step(params, [p.grad for p in params], lr)
    net.zero_grad()


def phase1_epoch(fe, gen, disc, data, cfg, epoch=0, hook=None):
    """One unsupervised epoch of Game 1 + Game 2; returns an EpochRecord."""
    cfg.validate()
    prior_rng = _rng(cfg, "prior", epoch)
    drop_rng = _rng(cfg, "dropout", epoch)
    shuffle_seed = derive_seed(cfg.seed, _STREAM["shuffle"], 1, epoch)
    sums = np.zeros(3)
    n_batches = 0

    for x, _ in minibatches(data, cfg.minibatch, shuffle_seed):
        # (a) Game 1: joint reconstruction step for extractor + generator
        z = fe.forward(x)
        x_rec = gen.forward(z)
        target = Tensor(np.ascontiguousarray(x).reshape(x_rec.shape))
        l_rec = losses.reconstruction_loss(target, x_rec)
        l_rec.backward()
        _update(fe, cfg.lr_fe)
        _update(gen, cfg.lr_gen)
        if hook:
            hook("recon", fe=fe, gen=gen, disc=disc)

        # (b) Game 2: k discriminator steps, extractor frozen
        for _ in range(cfg.disc_steps):
            z_prior = sample_prior(cfg, cfg.minibatch, prior_rng)
            z_fake = fe.forward(x).detach()
            d_real = disc.forward(z_prior, train=True, rng=drop_rng)
            d_fake = disc.forward(z_fake, train=True, rng=drop_rng)
            l_disc = losses.discriminator_loss(d_real, d_fake)
            l_disc.backward()
            _update(disc, cfg.lr_disc)
            if hook:
                hook("disc", fe=fe, gen=gen, disc=disc)

        # (c) extractor adversarial step, discriminator frozen
        z = fe.forward(x)
        d_out = disc.forward(z, train=False)
        l_adv = losses.generator_adv_loss(d_out)
        l_adv.backward()
        _update(fe, cfg.lr_fe)
        disc.zero_grad()
        if hook:
            hook("fe_adv", fe=fe, gen=gen, disc=disc)

        sums += (l_rec.value, l_disc.value, l_adv.value)
        n_batches += 1

    if n_batches == 0:
        raise ValueError("dataset smaller than one minibatch")
    return EpochRecord(phase=1, epoch=epoch,
                       recon_loss=sums[0] / n_batches,
                       disc_loss=sums[1] / n_batches,
                       gen_adv_loss=sums[2] / n_batches)


def phase2_finetune(fe, head, data, cfg, test_data=None, log=None, hook=None):
    """Supervised fine-tuning of extractor + classifier head."""
    cfg.validate()
    log = log if log is not None else TrainLog()
    composite = networks.compose(fe, head)
    for epoch in range(cfg.epochs_phase2):
        shuffle_seed = derive_seed(cfg.seed, _STREAM["shuffle"], 2, epoch)
        total, n_batches = 0.0, 0
        for x, y in minibatches(data, cfg.minibatch, shuffle_seed):
            z = fe.forward(x)
            if cfg.freeze_fe_phase2:
                z = z.detach()
            logits = head.forward(z)
            l_cls = losses.classification_loss(y, logits)
            l_cls.backward()
            if not cfg.freeze_fe_phase2:
                _update(fe, cfg.lr_cls)
            else:
                fe.zero_grad()
            _update(head, cfg.lr_cls)
            if hook:
                hook("cls", fe=fe, head=head)
            total += l_cls.value
            n_batches += 1
        rec = EpochRecord(phase=2, epoch=epoch, cls_loss=total / max(n_batches, 1),
                          train_acc=metrics.accuracy(composite, data),
                          test_acc=metrics.accuracy(composite, test_data)
                          if test_data is not None else None)
        log.append(rec)
    return log


def _build_supervised(arch, cfg, classes=10):
    fe = networks.build_feature_extractor(
        arch, cfg.latent_dim, seed=derive_seed(cfg.seed, _STREAM["fe_init"]))
    head = networks.build_classifier_head(
        cfg.latent_dim, classes=classes, seed=derive_seed(cfg.seed, _STREAM["cls_init"]))
    return fe, head


def train_baseline(arch, method, lam, data, cfg, test_data=None):
    """Single-phase supervised training with optional L1/L2 penalty."""
    if method not in ("none", "lasso", "tikhonov"):
        raise ValueError(f"baseline method must be none/lasso/tikhonov, got {method!r}")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    cfg.validate()
    fe, head = _build_supervised(arch, cfg, classes=data.classes)
    composite = networks.compose(fe, head)
    log = TrainLog()
    for epoch in range(cfg.epochs_phase2):
        shuffle_seed = derive_seed(cfg.seed, _STREAM["shuffle"], 2, epoch)
        total, n_batches = 0.0, 0
        for x, y in minibatches(data, cfg.minibatch, shuffle_seed):
            logits = composite.forward(x)
            l_cls = losses.classification_loss(y, logits)
            if lam > 0 and method != "none":
                penalty = (losses.l1_penalty if method == "lasso"
                           else losses.l2_penalty)(composite.weights())
                obj = losses.combined_objective(l_cls, penalty, lam)
            else:
                obj = l_cls
            obj.backward()
            _update(composite, cfg.lr_cls)
            total += l_cls.value
            n_batches += 1
        log.append(EpochRecord(phase=2, epoch=epoch, cls_loss=total / max(n_batches, 1),
                               train_acc=metrics.accuracy(composite, data),
                               test_acc=metrics.accuracy(composite, test_data)
                               if test_data is not None else None))
    return composite, log


def run_pipeline(cfg, arch, data, test_data=None):
    """Full training for any method; returns networks, log, and metrics."""
    cfg = replace(cfg).validate()
    if cfg.method == "adversarial":
        fe, head = _build_supervised(arch, cfg, classes=data.classes)
        gen = networks.build_generator(
            arch, cfg.latent_dim, seed=derive_seed(cfg.seed, _STREAM["gen_init"]))
        disc = networks.build_discriminator(
            cfg.latent_dim, cfg.disc_dropout, hidden=cfg.disc_hidden,
            seed=derive_seed(cfg.seed, _STREAM["disc_init"]))
        log = TrainLog()
        for epoch in range(cfg.epochs_phase1):
            log.append(phase1_epoch(fe, gen, disc, data, cfg, epoch=epoch))
        phase2_finetune(fe, head, data, cfg, test_data=test_data, log=log)
        composite = networks.compose(fe, head)
        aux = {"generator": gen, "discriminator": disc}
    else:
        composite, log = train_baseline(arch, cfg.method, cfg.lam, data, cfg,
                                        test_data=test_data)
        aux = {}

    stats = metrics.param_distribution_stats(composite)
    record = metrics.MetricsRecord(
        method=cfg.method,
        arch=arch,
        seed=cfg.seed,
        train_accuracy=metrics.accuracy(composite, data),
        test_accuracy=metrics.accuracy(composite, test_data)
        if test_data is not None else float("nan"),
        param_mean=stats["mean"],
        param_std=stats["std"],
    )
    return {"network": composite, "log": log, "metrics": record, **aux}
