"""Minimal dense tensor arithmetic with reverse-mode differentiation.

Tensors wrap numpy arrays (float32 by default, float64 available for
gradient checking) and record the operations applied to them so that
``backward()`` on a scalar result fills in ``.grad`` on every reachable
leaf. Only the operations needed by the networks and losses in this
project are implemented; there is no general broadcasting, no GPU path
and no higher-order derivatives.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "ShapeError",
    "GraphError",
    "matmul",
    "conv2d",
    "maxpool2d",
    "relu",
    "leaky_relu",
    "sigmoid",
    "upsample_bilinear2x",
    "dropout",
    "sgd_step",
]

DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class GraphError(RuntimeError):
    """Raised on graph-contract violations (non-scalar loss, reused graph)."""


class Tensor:
    """A node in the computation graph holding a dense numpy array."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op", "_done")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None
        self._op = "leaf"
        self._done = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op})"

    def detach(self):
        """A leaf tensor sharing this node's values but cut from the graph."""
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    # -- graph construction helpers -------------------------------------

    @staticmethod
    def _result(data, parents, op, backward):
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        out._op = op
        return out

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- elementwise arithmetic -----------------------------------------

    def _coerce(self, other):
        if isinstance(other, Tensor):
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other
        _check_addable(a.shape, b.shape)
        out_data = a.data + b.data

        def backward(grad):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad, b.shape))

        return Tensor._result(out_data, (a, b), "add", backward)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def backward(grad):
            if a.requires_grad:
                a._accumulate(-grad)

        return Tensor._result(-a.data, (a,), "neg", backward)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        _check_addable(a.shape, b.shape)
        out_data = a.data * b.data

        def backward(grad):
            if a.requires_grad:
                a._accumulate(_unbroadcast(grad * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(grad * a.data, b.shape))

        return Tensor._result(out_data, (a, b), "mul", backward)

    __rmul__ = __mul__

    def square(self):
        a = self

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad * (2.0 * a.data))

        return Tensor._result(a.data * a.data, (a,), "square", backward)

    def abs(self):
        a = self

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad * np.sign(a.data))

        return Tensor._result(np.abs(a.data), (a,), "abs", backward)

    def log(self):
        a = self

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad / a.data)

        return Tensor._result(np.log(a.data), (a,), "log", backward)

    def clamp(self, lo, hi):
        """Clip values; gradient passes through only inside [lo, hi]."""
        a = self
        out_data = np.clip(a.data, lo, hi)
        inside = ((a.data >= lo) & (a.data <= hi)).astype(a.data.dtype)

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad * inside)

        return Tensor._result(out_data, (a,), "clamp", backward)

    def sum(self):
        a = self

        def backward(grad):
            if a.requires_grad:
                a._accumulate(np.full_like(a.data, grad))

        return Tensor._result(a.data.sum(), (a,), "sum", backward)

    def reshape(self, *shape):
        a = self
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = a.data.reshape(shape)

        def backward(grad):
            if a.requires_grad:
                a._accumulate(grad.reshape(a.data.shape))

        return Tensor._result(out_data, (a,), "reshape", backward)

    # -- backward pass ---------------------------------------------------

    def backward(self):
        """Reverse-mode pass from a scalar node; fills .grad on leaves."""
        if self.data.size != 1:
            raise GraphError(f"backward requires a scalar loss, got shape {self.data.shape}")
        if self._done:
            raise GraphError("backward already ran on this graph; rebuild the forward pass first")
        self._done = True

        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def _check_addable(sa, sb):
    """Exact match or one side a bias-style (1,n)/(n,)/scalar operand."""
    if sa == sb:
        return
    try:
        np.broadcast_shapes(sa, sb)
    except ValueError:
        raise ShapeError(f"incompatible shapes {sa} and {sb}") from None


def _unbroadcast(grad, shape):
    """Sum a gradient back down to the shape of a broadcast operand."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a, b):
    """Matrix product of a[r,k] and b[k,c]."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out_data = a.data @ b.data

    def backward(grad):
        if a.requires_grad:
            a._accumulate(grad @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ grad)

    return Tensor._result(out_data, (a, b), "matmul", backward)


def conv2d(inp, kernel, bias=None, stride=1):
    """Valid-padding cross-correlation of inp[N,C,H,W] with kernel[F,C,kh,kw]."""
    inp, kernel = _as_tensor(inp), _as_tensor(kernel)
    if inp.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError(f"conv2d expects 4-d input and kernel, got {inp.shape} and {kernel.shape}")
    n, c, h, w = inp.shape
    f, kc, kh, kw = kernel.shape
    if kc != c:
        raise ShapeError(f"conv2d channel mismatch: input {inp.shape} vs kernel {kernel.shape}")
    if kh > h or kw > w:
        raise ShapeError(f"kernel {kernel.shape} larger than input {inp.shape}")
    if stride < 1:
        raise ShapeError(f"stride must be positive, got {stride}")
    if bias is not None:
        bias = _as_tensor(bias)
        if bias.shape != (f,):
            raise ShapeError(f"bias shape {bias.shape} does not match {f} filters")

    cols = np.lib.stride_tricks.sliding_window_view(inp.data, (kh, kw), axis=(2, 3))
    cols = cols[:, :, ::stride, ::stride]  # (N, C, Ho, Wo, kh, kw)
    out_data = np.einsum("nchwuv,fcuv->nfhw", cols, kernel.data, optimize=True)
    out_data = np.ascontiguousarray(out_data)
    if bias is not None:
        out_data = out_data + bias.data[None, :, None, None]
    ho, wo = out_data.shape[2], out_data.shape[3]

    parents = (inp, kernel) if bias is None else (inp, kernel, bias)

    def backward(grad):
        if kernel.requires_grad:
            kernel._accumulate(np.einsum("nchwuv,nfhw->fcuv", cols, grad, optimize=True))
        if bias is not None and bias.requires_grad:
            bias._accumulate(grad.sum(axis=(0, 2, 3)))
        if inp.requires_grad:
            dx = np.zeros_like(inp.data)
            for u in range(kh):
                for v in range(kw):
                    dx[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += np.einsum(
                        "nfhw,fc->nchw", grad, kernel.data[:, :, u, v], optimize=True)
            inp._accumulate(dx)

    return Tensor._result(out_data, parents, "conv2d", backward)


def maxpool2d(inp, kernel, stride):
    """Per-window maximum; ties route gradient to the first element in row-major order."""
    inp = _as_tensor(inp)
    if inp.data.ndim != 4:
        raise ShapeError(f"maxpool2d expects 4-d input, got {inp.shape}")
    n, c, h, w = inp.shape
    if kernel > h or kernel > w:
        raise ShapeError(f"pool kernel {kernel} larger than spatial dims {(h, w)}")
    windows = np.lib.stride_tricks.sliding_window_view(inp.data, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    flat = windows.reshape(n, c, ho, wo, kernel * kernel)
    arg = flat.argmax(axis=-1)  # first max in row-major order
    out_data = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    out_data = np.ascontiguousarray(out_data)

    def backward(grad):
        if not inp.requires_grad:
            return
        dx = np.zeros_like(inp.data)
        ui, vi = np.divmod(arg, kernel)
        ni, ci, ii, ji = np.indices((n, c, ho, wo))
        np.add.at(dx, (ni, ci, ii * stride + ui, ji * stride + vi), grad)
        inp._accumulate(dx)

    return Tensor._result(out_data, (inp,), "maxpool2d", backward)


def relu(x):
    x = _as_tensor(x)
    mask = (x.data > 0).astype(x.data.dtype)

    def backward(grad):
        if x.requires_grad:
            x._accumulate(grad * mask)

    return Tensor._result(x.data * mask, (x,), "relu", backward)


def leaky_relu(x, slope=0.1):
    x = _as_tensor(x)
    factor = np.where(x.data > 0, x.data.dtype.type(1), x.data.dtype.type(slope))

    def backward(grad):
        if x.requires_grad:
            x._accumulate(grad * factor)

    return Tensor._result(x.data * factor, (x,), "leaky_relu", backward)


def sigmoid(x):
    x = _as_tensor(x)
    out_data = 1.0 / (1.0 + np.exp(-x.data))

    def backward(grad):
        if x.requires_grad:
            x._accumulate(grad * out_data * (1.0 - out_data))

    return Tensor._result(out_data, (x,), "sigmoid", backward)


def _bilinear2x_matrix(size, dtype):
    """(2*size, size) interpolation matrix, half-pixel center alignment."""
    src = (np.arange(2 * size, dtype=np.float64) + 0.5) / 2.0 - 0.5
    src = np.clip(src, 0, size - 1)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, size - 1)
    frac = src - i0
    mat = np.zeros((2 * size, size), dtype=np.float64)
    rows = np.arange(2 * size)
    np.add.at(mat, (rows, i0), 1.0 - frac)
    np.add.at(mat, (rows, i1), frac)
    return mat.astype(dtype)


def upsample_bilinear2x(inp):
    """Double the spatial dims of inp[N,C,H,W] by bilinear interpolation."""
    inp = _as_tensor(inp)
    if inp.data.ndim != 4:
        raise ShapeError(f"upsample expects 4-d input, got {inp.shape}")
    n, c, h, w = inp.shape
    ah = _bilinear2x_matrix(h, inp.data.dtype)
    aw = _bilinear2x_matrix(w, inp.data.dtype)
    out_data = np.einsum("ph,nchw,qw->ncpq", ah, inp.data, aw, optimize=True)
    out_data = np.ascontiguousarray(out_data)

    def backward(grad):
        if inp.requires_grad:
            inp._accumulate(np.einsum("ph,ncpq,qw->nchw", ah, grad, aw, optimize=True))

    return Tensor._result(out_data, (inp,), "upsample_bilinear2x", backward)


def dropout(x, rate, rng):
    """Inverted dropout; deterministic under a seeded generator."""
    x = _as_tensor(x)
    if rate <= 0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.data.dtype) / x.data.dtype.type(1.0 - rate)

    def backward(grad):
        if x.requires_grad:
            x._accumulate(grad * keep)

    return Tensor._result(x.data * keep, (x,), "dropout", backward)


def sgd_step(params, grads, lr):
    """In-place θ ← θ − lr·g for matching lists of tensors/arrays."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} params vs {len(grads)} grads")
    for p, g in zip(params, grads):
        if g is None:
            continue
        g = g.data if isinstance(g, Tensor) else np.asarray(g)
        if p.data.shape != g.shape:
            raise ShapeError(f"param shape {p.data.shape} vs grad shape {g.shape}")
        if lr != 0.0:
            p.data -= p.data.dtype.type(lr) * g.astype(p.data.dtype)
    return params
