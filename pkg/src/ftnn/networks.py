"""Network construction: layer descriptors, the paper-style architectures
(A1-A4 plus desk-scale mini variants), generators, the discriminator, the
classifier head, and binary checkpointing.

A Network is an ordered list of layer descriptors (plain dicts, JSON
serializable) plus a name→Tensor parameter map. Composing two networks
shares the underlying parameter tensors, so training a composite updates
the original parts in place.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

__all__ = [
    "Network",
    "ARCHITECTURES",
    "CheckpointError",
    "build_feature_extractor",
    "build_classifier_head",
    "build_generator",
    "build_discriminator",
    "compose",
    "default_latent_dim",
    "save_checkpoint",
    "load_checkpoint",
]

ARCHITECTURES = ("a1", "a2", "a3", "a4", "a1_mini", "a4_mini")

CHECKPOINT_MAGIC = b"FTNN"
CHECKPOINT_VERSION = 1

_ACTIVATIONS = {
    "relu": ad.relu,
    "leaky_relu": lambda t: ad.leaky_relu(t, 0.1),
    "sigmoid": ad.sigmoid,
    None: lambda t: t,
    "linear": lambda t: t,
}


class CheckpointError(IOError):
    """Raised for malformed or incompatible checkpoint files."""


class Network:
    """Ordered layers with named parameters and a role tag."""

    def __init__(self, role, layers, params, meta=None):
        self.role = role
        self.layers = layers
        self.params = params  # dict name -> Tensor (requires_grad=True)
        self.meta = dict(meta or {})

    # -- introspection ---------------------------------------------------

    def parameter_count(self):
        return sum(p.data.size for p in self.params.values())

    def weight_names(self):
        """Names of weight/filter tensors (biases excluded)."""
        return [n for n in self.params if n.endswith(".weight") or n.endswith(".kernel")]

    def weights(self):
        return [self.params[n] for n in self.weight_names()]

    def conv_layer_names(self):
        return [l["name"] for l in self.layers if l["kind"] == "conv"]

    def hidden_layer_names(self):
        """Dense/conv layers except the final parameterized layer."""
        named = [l for l in self.layers if l["kind"] in ("dense", "conv")]
        return [l["name"] for l in named[:-1]]

    def descriptor(self):
        return {"role": self.role, "layers": self.layers, "meta": self.meta}

    # -- forward ---------------------------------------------------------

    def forward(self, x, train=False, rng=None, weight_masks=None, node_masks=None):
        """Run the network on a batch.

        weight_masks: name -> binary array multiplied into the parameter.
        node_masks: layer name -> binary vector multiplied into the
        post-activation output of that layer (dense layers only).
        """
        t = x if isinstance(x, Tensor) else Tensor(np.asarray(x))
        for layer in self.layers:
            t = self._forward_layer(layer, t, train, rng, weight_masks, node_masks)
        return t

    def _param(self, name, weight_masks):
        p = self.params[name]
        if weight_masks and name in weight_masks:
            return Tensor(p.data * weight_masks[name].astype(p.data.dtype))
        return p

    def _forward_layer(self, layer, t, train, rng, weight_masks, node_masks):
        kind = layer["kind"]
        name = layer.get("name")
        if kind == "flatten":
            return t.reshape(t.shape[0], -1)
        if kind == "reshape":
            return t.reshape((t.shape[0],) + tuple(layer["shape"]))
        if kind == "maxpool":
            return ad.maxpool2d(t, layer["kernel"], layer["stride"])
        if kind == "upsample2x":
            return ad.upsample_bilinear2x(t)
        if kind == "dropout":
            if train:
                if rng is None:
                    raise ValueError("dropout in training mode needs an rng")
                return ad.dropout(t, layer["rate"], rng)
            return t
        if kind == "dense":
            w = self._param(f"{name}.weight", weight_masks)
            b = self._param(f"{name}.bias", weight_masks)
            out = ad.matmul(t, w) + b
        elif kind == "conv":
            k = self._param(f"{name}.kernel", weight_masks)
            b = self._param(f"{name}.bias", weight_masks)
            out = ad.conv2d(t, k, bias=b, stride=layer["stride"])
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        out = _ACTIVATIONS[layer.get("activation")](out)
        if node_masks and name in node_masks:
            mask = node_masks[name].astype(out.data.dtype)
            out = out * Tensor(mask)
        return out

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def snapshot(self):
        """Copies of all parameter arrays, keyed by name."""
        return {n: p.data.copy() for n, p in self.params.items()}


# -- construction helpers ------------------------------------------------


def _init_weight(rng, shape, fan_in, dtype):
    bound = np.sqrt(6.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True)


def _zeros(shape, dtype):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=True)


class _Builder:
    def __init__(self, rng, dtype):
        self.rng = rng
        self.dtype = dtype
        self.layers = []
        self.params = {}

    def dense(self, name, n_in, n_out, activation):
        self.layers.append({"kind": "dense", "name": name, "in": n_in, "out": n_out,
                            "activation": activation})
        self.params[f"{name}.weight"] = _init_weight(self.rng, (n_in, n_out), n_in, self.dtype)
        self.params[f"{name}.bias"] = _zeros((n_out,), self.dtype)

    def conv(self, name, c_in, c_out, kernel, stride, activation):
        self.layers.append({"kind": "conv", "name": name, "in": c_in, "out": c_out,
                            "kernel": kernel, "stride": stride, "activation": activation})
        fan_in = c_in * kernel * kernel
        self.params[f"{name}.kernel"] = _init_weight(
            self.rng, (c_out, c_in, kernel, kernel), fan_in, self.dtype)
        self.params[f"{name}.bias"] = _zeros((c_out,), self.dtype)

    def simple(self, kind, **kw):
        self.layers.append({"kind": kind, **kw})

    def network(self, role, meta=None):
        return Network(role, self.layers, self.params, meta)


def default_latent_dim(arch):
    arch = arch.lower()
    if arch in ("a1", "a2"):
        return 64
    if arch in ("a3", "a4"):
        return 128
    return 32  # mini variants


def _check_arch(arch):
    arch = arch.lower()
    if arch not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    return arch


def _conv_out(size, kernel, stride):
    return (size - kernel) // stride + 1


def build_feature_extractor(arch, latent_dim=None, seed=0, dtype=np.float32):
    """Feature extractor q for the given architecture id."""
    arch = _check_arch(arch)
    if latent_dim is None:
        latent_dim = default_latent_dim(arch)
    if latent_dim < 1:
        raise ValueError(f"latent_dim must be >= 1, got {latent_dim}")
    b = _Builder(np.random.default_rng(seed), dtype)
    meta = {"arch": arch, "latent_dim": latent_dim}

    if arch in ("a1", "a1_mini"):
        widths = [512, 1024, 512] if arch == "a1" else [64, 128, 64]
        b.simple("flatten")
        prev = 784
        for i, wdt in enumerate(widths, 1):
            b.dense(f"fe_fc{i}", prev, wdt, "relu")
            prev = wdt
        b.dense("fe_latent", prev, latent_dim, None)
        meta["input_shape"] = [1, 28, 28]
    elif arch == "a2":
        b.conv("fe_conv1", 1, 20, 5, 1, "relu")
        b.simple("maxpool", kernel=2, stride=2)
        b.conv("fe_conv2", 20, 50, 5, 1, "relu")
        b.simple("maxpool", kernel=2, stride=2)
        b.simple("flatten")
        b.dense("fe_latent", 50 * 4 * 4, latent_dim, None)
        meta["input_shape"] = [1, 28, 28]
    elif arch == "a3":
        # Seven 3x3 conv layers; valid padding forces the single stride-2
        # downsampling step (layer 2) so the deepest layers still have room.
        filters = [64, 128, 256, 512, 256, 128, 128]
        strides = [1, 2, 1, 1, 1, 1, 1]
        prev_c, size = 3, 32
        for i, (f, s) in enumerate(zip(filters, strides), 1):
            b.conv(f"fe_conv{i}", prev_c, f, 3, s, "leaky_relu")
            prev_c, size = f, _conv_out(size, 3, s)
        b.simple("flatten")
        b.dense("fe_latent", prev_c * size * size, latent_dim, None)
        meta["input_shape"] = [3, 32, 32]
    else:  # a4, a4_mini
        filters = [64, 128, 128] if arch == "a4" else [16, 32, 32]
        prev_c, size = 3, 32
        for i, f in enumerate(filters, 1):
            b.conv(f"fe_conv{i}", prev_c, f, 3, 2, "leaky_relu")
            prev_c, size = f, _conv_out(size, 3, 2)
        b.simple("flatten")
        b.dense("fe_latent", prev_c * size * size, latent_dim, None)
        meta["input_shape"] = [3, 32, 32]

    return b.network("feature_extractor", meta)


def build_classifier_head(latent_dim, hidden=512, classes=10, seed=0, dtype=np.float32):
    """Dense head: latent → hidden (ReLU) → classes (linear)."""
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    b = _Builder(np.random.default_rng(seed), dtype)
    b.dense("cls_fc1", latent_dim, hidden, "relu")
    b.dense("cls_out", hidden, classes, None)
    return b.network("classifier", {"latent_dim": latent_dim, "classes": classes})


def build_generator(arch, latent_dim=None, seed=0, dtype=np.float32):
    """Decoder p mapping latent vectors back to image space, sigmoid output."""
    arch = _check_arch(arch)
    if latent_dim is None:
        latent_dim = default_latent_dim(arch)
    b = _Builder(np.random.default_rng(seed), dtype)
    meta = {"arch": arch, "latent_dim": latent_dim}

    if arch in ("a1", "a2", "a1_mini"):
        widths = [512, 512] if arch in ("a1", "a2") else [128, 128]
        prev = latent_dim
        for i, wdt in enumerate(widths, 1):
            b.dense(f"gen_fc{i}", prev, wdt, "relu")
            prev = wdt
        b.dense("gen_out", prev, 784, "sigmoid")
        meta["output_shape"] = [784]
    else:
        # Four conv layers, each followed by bilinear 2x upsampling:
        # a 2x2 seed map grows to 32x32. 1x1 kernels keep spatial size.
        channels = [128, 64, 32, 3] if arch in ("a3", "a4") else [32, 16, 8, 3]
        seed_c = channels[0]
        b.dense("gen_seed", latent_dim, seed_c * 2 * 2, "relu")
        b.simple("reshape", shape=[seed_c, 2, 2])
        prev = seed_c
        for i, c in enumerate(channels, 1):
            act = "sigmoid" if i == len(channels) else "leaky_relu"
            b.conv(f"gen_conv{i}", prev, c, 1, 1, act)
            b.simple("upsample2x")
            prev = c
        meta["output_shape"] = [3, 32, 32]

    return b.network("generator", meta)


def build_discriminator(latent_dim, dropout_rate=0.3, hidden=512, seed=0, dtype=np.float32):
    """MLP latent → hidden → hidden → 1 with sigmoid output probability."""
    if not 0 <= dropout_rate < 1:
        raise ValueError(f"dropout_rate must be in [0, 1), got {dropout_rate}")
    b = _Builder(np.random.default_rng(seed), dtype)
    b.dense("disc_fc1", latent_dim, hidden, "relu")
    b.simple("dropout", rate=dropout_rate)
    b.dense("disc_fc2", hidden, hidden, "relu")
    b.simple("dropout", rate=dropout_rate)
    b.dense("disc_out", hidden, 1, "sigmoid")
    return b.network("discriminator", {"latent_dim": latent_dim, "dropout": dropout_rate})


def compose(*nets):
    """Chain networks into one; parameter tensors are shared, not copied."""
    layers, params = [], {}
    meta = {}
    for net in nets:
        for layer in net.layers:
            layers.append(layer)
        for name, p in net.params.items():
            if name in params:
                raise ValueError(f"duplicate parameter name {name!r} while composing")
            params[name] = p
        meta.update(net.meta)
    return Network("composite", layers, params, meta)


# -- checkpointing -------------------------------------------------------


def save_checkpoint(net, path):
    """Binary format: magic 'FTNN', u32 version, length-prefixed JSON
    descriptor, then per-parameter records (name, rank, dims, f32 data)."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    desc = json.dumps(net.descriptor(), sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<I", len(desc)))
    buf.write(desc)
    for name in sorted(net.params):
        data = net.params[name].data.astype("<f4")
        nb = name.encode("utf-8")
        buf.write(struct.pack("<I", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<I", data.ndim))
        for d in data.shape:
            buf.write(struct.pack("<I", d))
        buf.write(data.tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def _read_exact(fh, n, what):
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"bad magic {magic!r}; not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (dlen,) = struct.unpack("<I", _read_exact(fh, 4, "descriptor length"))
        desc = json.loads(_read_exact(fh, dlen, "descriptor").decode("utf-8"))
        params = {}
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise CheckpointError("truncated checkpoint while reading record header")
            (nlen,) = struct.unpack("<I", head)
            name = _read_exact(fh, nlen, "parameter name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(fh, 4, "rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "dims"))
            count = int(np.prod(dims)) if dims else 1
            raw = _read_exact(fh, 4 * count, f"values of {name}")
            params[name] = Tensor(np.frombuffer(raw, dtype="<f4").reshape(dims).copy(),
                                  requires_grad=True)
    net = Network(desc["role"], desc["layers"], params, desc.get("meta"))
    _validate_params(net)
    return net


def _validate_params(net):
    for layer in net.layers:
        if layer["kind"] == "dense":
            name = layer["name"]
            for suffix, shape in ((".weight", (layer["in"], layer["out"])),
                                  (".bias", (layer["out"],))):
                key = name + suffix
                if key not in net.params:
                    raise CheckpointError(f"missing parameter {key}")
                if net.params[key].shape != shape:
                    raise CheckpointError(
                        f"{key} has shape {net.params[key].shape}, descriptor says {shape}")
        elif layer["kind"] == "conv":
            name = layer["name"]
            kshape = (layer["out"], layer["in"], layer["kernel"], layer["kernel"])
            for suffix, shape in ((".kernel", kshape), (".bias", (layer["out"],))):
                key = name + suffix
                if key not in net.params:
                    raise CheckpointError(f"missing parameter {key}")
                if net.params[key].shape != shape:
                    raise CheckpointError(
                        f"{key} has shape {net.params[key].shape}, descriptor says {shape}")
