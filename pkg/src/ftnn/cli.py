"""Command-line harness: train, sweep, compare.

Config values come from (lowest to highest precedence) built-in
defaults, an INI-style config file with one section per subcommand, and
command-line flags. Every run echoes its fully resolved configuration
beside the outputs; re-running from the echoed file reproduces the
outputs byte-identically.

Exit codes: 0 success, 1 runtime failure, 2 config error, 3 data error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import os
import shutil
import sys
import tempfile

import numpy as np

from . import data as dio
from . import faults, metrics, networks
from .training import METHODS, TrainConfig, run_pipeline

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_DATA = 3


class ConfigError(Exception):
    pass


# key -> (type, default); a None default means "required only when used"
_COMMON_KEYS = {
    "out": (str, "."),
    "seed": (int, 0),
    "jobs": (int, 1),
}

_DATA_KEYS = {
    "dataset": (str, "synthetic"),  # synthetic | toy | idx | cifar10
    "train_images": (str, ""),
    "train_labels": (str, ""),
    "test_images": (str, ""),
    "test_labels": (str, ""),
    "cifar_train": (str, ""),  # comma-separated batch files
    "cifar_test": (str, ""),
    "synthetic_shape": (str, "fashion"),  # fashion | cifar
    "train_n": (int, 10000),
    "test_n": (int, 2000),
    "subset": (int, 0),  # 0 = use everything
    "test_subset": (int, 0),
}

SCHEMAS = {
    "train": {
        **_COMMON_KEYS,
        **_DATA_KEYS,
        "arch": (str, "a1_mini"),
        "method": (str, "adversarial"),
        "lam": (float, 0.0),
        "latent_dim": (int, 32),
        "minibatch": (int, 32),
        "epochs_phase1": (int, 5),
        "epochs_phase2": (int, 10),
        "disc_steps": (int, 1),
        "lr_fe": (float, 0.002),
        "lr_gen": (float, 0.002),
        "lr_cls": (float, 0.002),
        "lr_disc": (float, 5e-5),
        "disc_hidden": (int, 512),
        "disc_dropout": (float, 0.3),
    },
    "sweep": {
        **_COMMON_KEYS,
        **_DATA_KEYS,
        "checkpoint": (str, ""),
        "fault": (str, "weight"),
        "fractions": (str, "0:0.6:0.1"),
        "trials": (int, 10),
    },
    "compare": {
        **_COMMON_KEYS,
        "inputs": (str, ""),  # comma-separated metrics CSV paths
    },
}


def parse_fraction_range(text):
    """'start:stop:step' inclusive grid, or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"fraction range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise ConfigError("fraction step must be positive")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + i * step, 10) for i in range(n)]
    else:
        values = [float(p) for p in text.split(",") if p.strip()]
    if not values or sorted(values) != values or not all(0 <= v <= 1 for v in values):
        raise ConfigError(f"fractions must be ascending within [0,1], got {text!r}")
    return values


def _resolve(section, file_values, flag_values):
    schema = SCHEMAS[section]
    resolved = {k: default for k, (_, default) in schema.items()}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if value is None:
                continue
            if key not in schema:
                raise ConfigError(f"unknown key {key!r} for subcommand {section!r}")
            typ = schema[key][0]
            try:
                resolved[key] = typ(value)
            except ValueError:
                raise ConfigError(f"bad value {value!r} for key {key!r}") from None
    return resolved


def _read_config_file(path, section):
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    if not parser.has_section(section):
        return {}
    return dict(parser.items(section))


def _echo_config(resolved, section, path):
    lines = [f"[{section}]"]
    for key in sorted(resolved):
        lines.append(f"{key} = {resolved[key]}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_split(cfg, split):
    kind = cfg["dataset"]
    if kind == "synthetic":
        shape = (1, 28, 28) if cfg["synthetic_shape"] == "fashion" else (3, 32, 32)
        n = cfg["train_n"] if split == "train" else cfg["test_n"]
        seed = cfg["seed"] * 2 + (0 if split == "train" else 1)
        ds = dio.synthetic_images(n, shape=shape, seed=seed, split=split)
    elif kind == "toy":
        n = cfg["train_n"] if split == "train" else cfg["test_n"]
        ds = dio.synthetic_toy(n, seed=cfg["seed"] * 2 + (0 if split == "train" else 1))
    elif kind == "idx":
        images = cfg["train_images"] if split == "train" else cfg["test_images"]
        labels = cfg["train_labels"] if split == "train" else cfg["test_labels"]
        if not images or not labels:
            raise dio.DataError(f"idx dataset requires {split} image and label paths")
        if not os.path.exists(images) or not os.path.exists(labels):
            raise dio.DataError(f"missing {split} IDX files: {images}, {labels}")
        ds = dio.load_idx(images, labels, split)
    elif kind == "cifar10":
        key = "cifar_train" if split == "train" else "cifar_test"
        paths = [p for p in cfg[key].split(",") if p]
        if not paths:
            raise dio.DataError(f"cifar10 dataset requires {key} paths")
        for p in paths:
            if not os.path.exists(p):
                raise dio.DataError(f"missing CIFAR batch file {p}")
        ds = dio.load_cifar10(paths, split)
    else:
        raise ConfigError(f"unknown dataset kind {cfg['dataset']!r}")
    limit = cfg["subset"] if split == "train" else cfg["test_subset"]
    if limit:
        ds = ds.subset(limit)
    return ds


class _Staging:
    """Collects outputs in a temp dir and publishes them atomically."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.tmp = tempfile.mkdtemp(prefix=".staging-", dir=out_dir)

    def path(self, name):
        return os.path.join(self.tmp, name)

    def publish(self):
        for name in sorted(os.listdir(self.tmp)):
            os.replace(os.path.join(self.tmp, name), os.path.join(self.out_dir, name))
        os.rmdir(self.tmp)

    def discard(self):
        shutil.rmtree(self.tmp, ignore_errors=True)


def _cmd_train(cfg):
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg['method']!r}")
    if cfg["arch"] not in networks.ARCHITECTURES:
        raise ConfigError(f"arch must be one of {networks.ARCHITECTURES}")
    train_cfg = TrainConfig(
        seed=cfg["seed"], minibatch=cfg["minibatch"],
        epochs_phase1=cfg["epochs_phase1"], epochs_phase2=cfg["epochs_phase2"],
        disc_steps=cfg["disc_steps"], lr_fe=cfg["lr_fe"], lr_gen=cfg["lr_gen"],
        lr_cls=cfg["lr_cls"], lr_disc=cfg["lr_disc"], lam=cfg["lam"],
        latent_dim=cfg["latent_dim"], disc_hidden=cfg["disc_hidden"],
        disc_dropout=cfg["disc_dropout"], method=cfg["method"],
    )
    try:
        train_cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    train_data = _load_split(cfg, "train")
    test_data = _load_split(cfg, "test")

    result = run_pipeline(train_cfg, cfg["arch"], train_data, test_data)
    net = result["network"]
    net.meta["test_accuracy"] = f"{result['metrics'].test_accuracy:.4f}"
    net.meta["method"] = cfg["method"]

    staging = _Staging(cfg["out"])
    try:
        networks.save_checkpoint(net, staging.path("checkpoint.ftnn"))
        result["log"].write_csv(staging.path("trainlog.csv"))
        metrics.emit_report([result["metrics"]], [], staging.path("metrics.csv"))
        _echo_config(cfg, "train", staging.path("resolved_train.cfg"))
        staging.publish()
    except Exception:
        staging.discard()
        raise
    return EXIT_OK


def _cmd_sweep(cfg):
    if cfg["fault"] not in faults.FAULT_KINDS:
        raise ConfigError(f"fault must be one of {faults.FAULT_KINDS}")
    fractions = parse_fraction_range(cfg["fractions"])
    if not cfg["checkpoint"]:
        raise ConfigError("sweep requires a checkpoint path")
    net = networks.load_checkpoint(cfg["checkpoint"])
    if cfg["fault"] == "filter" and not net.conv_layer_names():
        raise ConfigError(
            f"checkpoint {cfg['checkpoint']} has no conv layers; "
            "filter faults do not apply")
    eval_data = _load_split(cfg, "test")
    curve = faults.degradation_sweep(net, cfg["fault"], fractions, cfg["trials"],
                                     eval_data, cfg["seed"], jobs=cfg["jobs"])
    staging = _Staging(cfg["out"])
    try:
        curve.write_csv(staging.path(f"sweep_{cfg['fault']}.csv"),
                        staging.path(f"summary_{cfg['fault']}.csv"))
        _echo_config(cfg, "sweep", staging.path("resolved_sweep.cfg"))
        staging.publish()
    except Exception:
        staging.discard()
        raise
    return EXIT_OK


def _cmd_compare(cfg):
    paths = [p for p in cfg["inputs"].split(",") if p]
    if len(paths) < 2:
        raise ConfigError("compare needs at least 2 metrics CSV files")
    rows = []
    for path in paths:
        if not os.path.exists(path):
            raise dio.DataError(f"missing metrics file {path}")
        rows.extend(metrics.parse_comparison_csv(path))
    keys = [(r["method"], r["arch"], r["seed"]) for r in rows]
    if len(set(keys)) != len(keys):
        dup = next(k for k in keys if keys.count(k) > 1)
        raise ConfigError(f"duplicate (method, arch, seed) rows: {dup}")
    rows.sort(key=lambda r: (r["arch"], r["method"]))
    staging = _Staging(cfg["out"])
    try:
        with open(staging.path("comparison.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=metrics.COMPARISON_FIELDS,
                                    lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        _echo_config(cfg, "compare", staging.path("resolved_compare.cfg"))
        staging.publish()
    except Exception:
        staging.discard()
        raise
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(prog="ftnn",
                                     description="Fault-tolerance workbench for neural networks")
    sub = parser.add_subparsers(dest="command", required=True)
    for section, schema in SCHEMAS.items():
        p = sub.add_parser(section)
        p.add_argument("--config", default=None)
        for key, (typ, _) in schema.items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ, default=None)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    section = args.command
    flag_values = {k: getattr(args, k) for k in SCHEMAS[section]}
    try:
        file_values = {}
        if args.config:
            file_values = _read_config_file(args.config, section)
        cfg = _resolve(section, file_values, flag_values)
        handler = {"train": _cmd_train, "sweep": _cmd_sweep, "compare": _cmd_compare}[section]
        return handler(cfg)
    except (ConfigError, networks.CheckpointError) as exc:
        print(f"ftnn {section}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except dio.DataError as exc:
        print(f"ftnn {section}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"ftnn {section}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
