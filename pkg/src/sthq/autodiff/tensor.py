"""Reverse-mode automatic differentiation over numpy arrays.

Graphs are built eagerly: every operation on a :class:`Tensor` computes its
value immediately and records a closure that maps the output gradient to the
gradients of its parents.  :meth:`Tensor.backward` walks the recorded graph in
reverse creation order, so gradient accumulation order is fixed by node index.
"""

from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

_node_ids = itertools.count()


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible for an op."""


class NonFiniteError(FloatingPointError):
    """Raised when a NaN or Inf would enter the graph."""


def _as_array(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    return arr


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "id", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple = (), _backward: Callable | None = None, _op: str = "leaf"):
        arr = data if isinstance(data, np.ndarray) and data.dtype == np.float64 else _as_array(data)
        if not np.isfinite(arr).all():
            raise NonFiniteError(f"{_op}: non-finite value produced (shape {arr.shape})")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.op = _op
        self.id = next(_node_ids)
        self._parents = _parents
        self._backward = _backward
        self.name = name

    # -- basic protocol -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operators ------------------------------------------------------

    def __add__(self, other): return add(self, other)
    def __radd__(self, other): return add(other, self)
    def __sub__(self, other): return sub(self, other)
    def __rsub__(self, other): return sub(other, self)
    def __mul__(self, other): return mul(self, other)
    def __rmul__(self, other): return mul(other, self)
    def __truediv__(self, other): return div(self, other)
    def __rtruediv__(self, other): return div(other, self)
    def __neg__(self): return neg(self)
    def __pow__(self, exponent): return power(self, exponent)
    def __matmul__(self, other): return matmul(self, other)
    def __getitem__(self, index): return getitem(self, index)

    def sum(self, axis=None, keepdims=False): return sum_(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)
    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 else shape)
    def transpose(self, *axes): return transpose(self, axes[0] if len(axes) == 1 else (axes or None))

    @property
    def T(self): return transpose(self, None)

    # -- reverse pass ---------------------------------------------------

    def backward(self) -> None:
        """Populate ``.grad`` on every node that feeds this scalar."""
        if self.data.size != 1:
            raise ShapeError(f"backward: output must be a scalar, got shape {self.shape}")
        nodes = {}
        stack = [self]
        while stack:
            node = stack.pop()
            if node.id in nodes:
                continue
            nodes[node.id] = node
            stack.extend(p for p in node._parents if p.requires_grad)
        order = sorted(nodes.values(), key=lambda n: n.id, reverse=True)
        for node in order:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is None or node.grad is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if g.shape != parent.data.shape:
                    g = np.broadcast_to(g, parent.data.shape)
                parent.grad = g.copy() if parent.grad is None else parent.grad + g


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


def _make(data, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    parents = tuple(parents)
    if not any(p.requires_grad for p in parents):
        return Tensor(data, _op=op)
    return Tensor(data, _parents=parents, _backward=backward, _op=op)


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape("add", a, b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape("sub", a, b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape("mul", a, b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape("div", a, b)
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)), "div")


def neg(a) -> Tensor:
    a = _wrap(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, exponent: float) -> Tensor:
    a = _wrap(a)
    if isinstance(exponent, Tensor):
        raise TypeError("power: exponent must be a python number")
    out = a.data ** exponent
    return _make(out, (a,), lambda g: (g * exponent * a.data ** (exponent - 1),), "pow")


def square(a) -> Tensor:
    a = _wrap(a)
    return _make(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def exp(a) -> Tensor:
    a = _wrap(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = _wrap(a)
    if (a.data <= 0).any():
        raise NonFiniteError(f"log: non-positive input (min {a.data.min()!r})")
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def relu(a) -> Tensor:
    a = _wrap(a)
    mask = a.data > 0  # derivative at exactly 0 is 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


# -- reductions ---------------------------------------------------------------

def _expand_reduced(g: np.ndarray, shape: tuple, axis, keepdims: bool) -> np.ndarray:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    return _make(out, (a,), lambda g: (_expand_reduced(g, a.shape, axis, keepdims),), "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(out.size, 1)
    return _make(out, (a,),
                 lambda g: (_expand_reduced(g, a.shape, axis, keepdims) / count,), "mean")


def squared_error(a, b, reduction: str = "mean") -> Tensor:
    """Sum or mean of ``(a - b)**2`` over all elements."""
    a, b = _wrap(a), _wrap(b)
    if a.shape != b.shape:
        raise ShapeError(f"squared_error: shapes {a.shape} and {b.shape} differ")
    diff = a.data - b.data
    scale = 1.0 / diff.size if reduction == "mean" else 1.0
    out = scale * np.dot(diff.ravel(), diff.ravel())
    return _make(out, (a, b), lambda g: (2.0 * scale * g * diff, -2.0 * scale * g * diff),
                 "squared_error")


# -- softmax family -------------------------------------------------------------

def softmax(a) -> Tensor:
    """Softmax along the last axis, stabilised by max subtraction."""
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return _make(out, (a,), backward, "softmax")


def log_softmax(a) -> Tensor:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _make(out, (a,), backward, "log_softmax")


def cross_entropy(logits, labels: np.ndarray) -> Tensor:
    """Mean categorical cross entropy (nats) of integer ``labels``."""
    logits = _wrap(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs labels {labels.shape}")
    logp = log_softmax(logits)
    picked = getitem(logp, (np.arange(len(labels)), labels))
    return neg(mean(picked))


# -- linear algebra & shape ---------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {a.shape} into {shape}") from None
    return _make(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None) -> Tensor:
    a = _wrap(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return _make(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def getitem(a, index) -> Tensor:
    a = _wrap(a)
    out = a.data[index]

    parts = index if isinstance(index, tuple) else (index,)
    basic = all(isinstance(i, (slice, int)) or i is None or i is Ellipsis for i in parts)

    def backward(g):
        full = np.zeros_like(a.data)
        if basic:  # views never repeat an element
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _make(np.array(out, dtype=np.float64), (a,), backward, "getitem")


def take_rows(a, indices: np.ndarray) -> Tensor:
    """Gather rows ``a[indices]``; repeated indices accumulate gradient."""
    a = _wrap(a)
    indices = np.asarray(indices, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, indices, g)
        return (full,)

    return _make(a.data[indices], (a,), backward, "take_rows")


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.shape for t in tensors]
        raise ShapeError(f"concat: incompatible shapes {shapes} along axis {axis}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tensors, backward, "concat")


# -- convolution ----------------------------------------------------------------------

def _windows(xp: np.ndarray, k: int, stride: int, ho: int, wo: int) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    return win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation. ``x`` is (N, C, H, W), ``w`` is (O, C, k, k)."""
    x, w = _wrap(x), _wrap(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1] or w.shape[2] != w.shape[3]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}")
    n, c, h, wd = x.shape
    o, _, k, _ = w.shape
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"conv2d: kernel {k} larger than padded input {x.shape}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _windows(xp, k, stride, ho, wo).transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * k * k)
    wmat = w.data.reshape(o, c * k * k)
    out = (cols @ wmat.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    parents = [x, w]
    if b is not None:
        b = _wrap(b)
        if b.shape != (o,):
            raise ShapeError(f"conv2d: bias {b.shape} does not match {o} output channels")
        out = out + b.data[None, :, None, None]
        parents.append(b)

    def backward(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(n * ho * wo, o)
        gw = (g2.T @ cols).reshape(w.shape)
        dcols = np.ascontiguousarray((g2 @ wmat).reshape(n, ho, wo, c, k, k).transpose(4, 5, 0, 3, 1, 2))
        dxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[i, j]
        gx = dxp[:, :, padding : padding + h, padding : padding + wd]
        grads = [gx, gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return _make(np.ascontiguousarray(out), parents, backward, "conv2d")


def upsample2x(x) -> Tensor:
    """Nearest-neighbour 2x upsampling of an (N, C, H, W) tensor."""
    x = _wrap(x)
    if x.ndim != 4:
        raise ShapeError(f"upsample2x: expected 4-D input, got {x.shape}")
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)
    return _make(out, (x,), lambda g: (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),), "upsample2x")
