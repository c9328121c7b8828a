"""Stuck-at-0 fault injection: mask generation, faulty evaluation views,
epsilon fault-tolerance reports and degradation sweeps.

Mask kinds:
  weight - individual entries of every weight/filter tensor (biases kept)
  node   - post-activation outputs of hidden dense layers
  filter - whole output channels of conv layers (kernel slice and bias)

Per targeted layer, exactly floor(p * target_count) sites are zeroed,
chosen uniformly without replacement from a seeded stream.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics

__all__ = [
    "FaultMask",
    "FaultToleranceReport",
    "FaultyNetwork",
    "DegradationCurve",
    "FAULT_KINDS",
    "gen_mask",
    "apply_mask",
    "epsilon_ft",
    "degradation_sweep",
]

FAULT_KINDS = ("weight", "node", "filter")

SWEEP_FIELDS = ["fault_kind", "fraction", "trial", "seed", "test_accuracy"]
SUMMARY_FIELDS = ["fault_kind", "fraction", "mean_accuracy", "std_accuracy", "epsilon_max"]


@dataclass
class FaultMask:
    kind: str
    fraction: float
    seed: int
    param_masks: dict = field(default_factory=dict)  # name -> binary array
    node_masks: dict = field(default_factory=dict)  # layer name -> binary vector
    descriptor: dict = field(default_factory=dict)


@dataclass
class FaultToleranceReport:
    epsilon: float
    mean_deviation: float
    faulty_accuracy: float
    fraction: float
    trials: int = 1


class FaultyNetwork:
    """Evaluation-only view of a network with a mask applied; the base
    network is never modified."""

    def __init__(self, base, mask):
        self.base = base
        self.mask = mask

    def forward(self, x):
        return self.base.forward(x, weight_masks=self.mask.param_masks,
                                 node_masks=self.mask.node_masks)


def _masked_vector(count, p, rng):
    mask = np.ones(count, dtype=np.float32)
    n_zero = int(np.floor(p * count))
    if n_zero:
        mask[rng.permutation(count)[:n_zero]] = 0.0
    return mask


def gen_mask(net, kind, p, seed, include_output_nodes=False):
    """Generate a stuck-at-0 mask set for a network.

    Regeneration with the same (kind, p, seed) on the same network
    descriptor is bitwise-identical.
    """
    if kind not in FAULT_KINDS:
        raise ValueError(f"fault kind must be one of {FAULT_KINDS}, got {kind!r}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"fault fraction must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    mask = FaultMask(kind, p, seed, descriptor=net.descriptor())

    if kind == "weight":
        for name in net.weight_names():
            shape = net.params[name].shape
            mask.param_masks[name] = _masked_vector(
                int(np.prod(shape)), p, rng).reshape(shape)
    elif kind == "filter":
        conv_layers = [l for l in net.layers if l["kind"] == "conv"]
        if not conv_layers:
            raise ValueError("filter faults require a network with conv layers")
        for layer in conv_layers:
            name = layer["name"]
            n_filters = layer["out"]
            chan = _masked_vector(n_filters, p, rng)
            kshape = net.params[f"{name}.kernel"].shape
            # a dead filter zeroes its whole kernel slice and its bias
            mask.param_masks[f"{name}.kernel"] = np.broadcast_to(
                chan[:, None, None, None], kshape).astype(np.float32).copy()
            mask.param_masks[f"{name}.bias"] = chan.copy()
    else:  # node
        targets = _node_targets(net, include_output_nodes)
        if not targets:
            raise ValueError("no dense layers available for node faults")
        for name, width in targets:
            mask.node_masks[name] = _masked_vector(width, p, rng)
    return mask


def _node_targets(net, include_output_nodes):
    dense = [(l["name"], l["out"]) for l in net.layers if l["kind"] == "dense"]
    if dense and not include_output_nodes:
        dense = dense[:-1]
    return dense


def apply_mask(net, mask):
    """Faulty evaluation view; raises if the mask was built for another model."""
    if mask.descriptor.get("layers") != net.layers:
        raise ValueError("mask descriptor does not match this network")
    return FaultyNetwork(net, mask)


def epsilon_ft(net, faulty, eval_inputs, labels=None):
    """Max and mean L2 output deviation between a network and its faulty view."""
    eval_inputs = np.asarray(eval_inputs)
    if len(eval_inputs) == 0:
        raise ValueError("epsilon_ft needs a non-empty evaluation set")
    clean = _forward_chunks(net, eval_inputs)
    dirty = _forward_chunks(faulty, eval_inputs)
    deviations = np.linalg.norm(clean - dirty, axis=1)
    acc = float("nan")
    if labels is not None:
        acc = float(np.mean(np.argmax(dirty, axis=1) == np.asarray(labels)) * 100.0)
    return FaultToleranceReport(
        epsilon=float(deviations.max()),
        mean_deviation=float(deviations.mean()),
        faulty_accuracy=acc,
        fraction=getattr(faulty, "mask", None).fraction if hasattr(faulty, "mask") else 0.0,
    )


def _forward_chunks(net, inputs):
    outs = []
    for start in range(0, len(inputs), metrics.EVAL_CHUNK):
        out = net.forward(inputs[start:start + metrics.EVAL_CHUNK])
        outs.append(out.data if hasattr(out, "data") else np.asarray(out))
    return np.concatenate(outs)


@dataclass
class DegradationCurve:
    fault_kind: str
    rows: list  # (fraction, trial, seed, accuracy)
    summary: list  # (fraction, mean_acc, std_acc, epsilon_max)

    def summary_rows(self):
        return [(self.fault_kind, f"{f:.4f}", f"{m:.4f}", f"{s:.4f}", f"{e:.6f}")
                for f, m, s, e in self.summary]

    def write_csv(self, rows_path, summary_path):
        with open(rows_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SWEEP_FIELDS)
            for frac, trial, seed, acc in self.rows:
                writer.writerow([self.fault_kind, f"{frac:.4f}", trial, seed, f"{acc:.4f}"])
        with open(summary_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SUMMARY_FIELDS)
            for row in self.summary_rows():
                writer.writerow(row)


def degradation_sweep(net, kind, fractions, trials, eval_set, seed, jobs=1,
                      include_output_nodes=False):
    """Evaluate `trials` random masks at each fault fraction.

    Results are merged deterministically by (fraction, trial) key, so the
    output is identical whatever the worker count.
    """
    fractions = list(fractions)
    if not fractions:
        raise ValueError("fractions must be non-empty")
    if sorted(fractions) != fractions or not all(0.0 <= f <= 1.0 for f in fractions):
        raise ValueError("fractions must be ascending and within [0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")

    tasks = []
    for fi, frac in enumerate(fractions):
        for trial in range(trials):
            trial_seed = int(np.random.SeedSequence([seed, fi, trial]).generate_state(1)[0])
            tasks.append((fi, frac, trial, trial_seed))

    def run(task):
        fi, frac, trial, trial_seed = task
        mask = gen_mask(net, kind, frac, trial_seed,
                        include_output_nodes=include_output_nodes)
        faulty = apply_mask(net, mask)
        report = epsilon_ft(net, faulty, eval_set.images, eval_set.labels)
        return fi, frac, trial, trial_seed, report

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]
    results.sort(key=lambda r: (r[0], r[2]))

    rows, summary = [], []
    for fi, frac in enumerate(fractions):
        accs, epss = [], []
        for rfi, rfrac, trial, trial_seed, report in results:
            if rfi != fi:
                continue
            rows.append((frac, trial, trial_seed, report.faulty_accuracy))
            accs.append(report.faulty_accuracy)
            epss.append(report.epsilon)
        summary.append((frac, float(np.mean(accs)), float(np.std(accs)), float(np.max(epss))))
    return DegradationCurve(kind, rows, summary)
