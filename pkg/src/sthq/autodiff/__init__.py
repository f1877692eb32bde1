from .optim import SGD, Adam, Optimizer
from .tensor import (
    NonFiniteError,
    ShapeError,
    Tensor,
    add,
    concat,
    conv2d,
    cross_entropy,
    div,
    exp,
    getitem,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    power,
    relu,
    reshape,
    softmax,
    square,
    squared_error,
    sub,
    sum_,
    take_rows,
    tanh,
    tensor,
    transpose,
    upsample2x,
)


def forward(fn, **inputs):
    """Evaluate ``fn`` on named inputs, wrapping arrays as trainable leaves.

    Returns ``(output, leaves)`` so callers can run ``output.backward()`` and
    read ``leaves[name].grad``.
    """
    leaves = {k: v if isinstance(v, Tensor) else Tensor(v, requires_grad=True, name=k)
              for k, v in inputs.items()}
    return fn(**leaves), leaves


def value_and_grad(fn, **inputs):
    """Return the scalar value of ``fn`` and the gradient for every named input."""
    out, leaves = forward(fn, **inputs)
    out.backward()
    grads = {k: (t.grad if t.grad is not None else 0.0 * t.data) for k, t in leaves.items()}
    return out.item(), grads


__all__ = [
    "Adam", "NonFiniteError", "Optimizer", "SGD", "ShapeError", "Tensor", "add", "concat",
    "conv2d", "cross_entropy", "div", "exp", "forward", "getitem", "log", "log_softmax",
    "matmul", "mean", "mul", "neg", "power", "relu", "reshape", "softmax", "square",
    "squared_error", "sub", "sum_", "take_rows", "tanh", "tensor", "transpose", "upsample2x",
    "value_and_grad",
]
