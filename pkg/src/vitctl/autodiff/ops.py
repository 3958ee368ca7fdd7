"""Differentiable operations over :class:`~vitctl.autodiff.tensor.Tensor`.

Every operation accepts tensors or parameters, computes its result with numpy and,
when a tape is recording, registers a closure that maps the output adjoint to the
input adjoints. Broadcasting follows numpy; adjoints of broadcast operands are summed
back to the operand's shape.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from vitctl.autodiff.tensor import Operand, Tensor, as_tensor, record_op
from vitctl.exceptions import DimensionError, LabelIndexError, TensorError

LAYER_NORM_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_K = 0.044715


def _same_precision(*tensors: Tensor) -> None:
    dtypes = {t.data.dtype for t in tensors}
    if len(dtypes) > 1:
        names = ", ".join(sorted(d.name for d in dtypes))
        raise TensorError(f"operands mix precisions ({names})")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum an adjoint over the axes numpy broadcast to reach ``grad.shape``."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a: Operand, b: Operand) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _same_precision(ta, tb)
    _broadcast(ta, tb, "add")

    def adjoint(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, ta.shape), _unbroadcast(g, tb.shape)

    return record_op("add", ta.data + tb.data, (ta, tb), adjoint)


def sub(a: Operand, b: Operand) -> Tensor:
    ta, tb = as_tensor(a), as_tensor(b)
    _same_precision(ta, tb)
    _broadcast(ta, tb, "sub")

    def adjoint(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g, ta.shape), _unbroadcast(-g, tb.shape)

    return record_op("sub", ta.data - tb.data, (ta, tb), adjoint)


def mul(a: Operand, b: Operand) -> Tensor:
    """Elementwise product."""
    ta, tb = as_tensor(a), as_tensor(b)
    _same_precision(ta, tb)
    _broadcast(ta, tb, "mul")

    def adjoint(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return _unbroadcast(g * tb.data, ta.shape), _unbroadcast(g * ta.data, tb.shape)

    return record_op("mul", ta.data * tb.data, (ta, tb), adjoint)


def scale(a: Operand, factor: float) -> Tensor:
    ta = as_tensor(a)
    f = ta.data.dtype.type(factor)

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        return (g * f,)

    return record_op("scale", ta.data * f, (ta,), adjoint)


def matmul(a: Operand, b: Operand) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    ta, tb = as_tensor(a), as_tensor(b)
    if ta.ndim < 2 or tb.ndim < 2 or ta.shape[-1] != tb.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply shapes {ta.shape} and {tb.shape}")
    _same_precision(ta, tb)
    try:
        out = np.matmul(ta.data, tb.data)
    except ValueError:
        raise DimensionError(f"matmul: cannot multiply shapes {ta.shape} and {tb.shape}") from None

    def adjoint(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ga = np.matmul(g, np.swapaxes(tb.data, -1, -2))
        gb = np.matmul(np.swapaxes(ta.data, -1, -2), g)
        return _unbroadcast(ga, ta.shape), _unbroadcast(gb, tb.shape)

    return record_op("matmul", out, (ta, tb), adjoint)


def sum(a: Operand, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    ta = as_tensor(a)
    out = np.sum(ta.data, axis=axis, keepdims=keepdims)

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, ta.shape).copy(),)

    return record_op("sum", np.asarray(out), (ta,), adjoint)


def mean(a: Operand, axis: int | None = None, keepdims: bool = False) -> Tensor:
    ta = as_tensor(a)
    count = ta.size if axis is None else ta.shape[axis]
    out = np.mean(ta.data, axis=axis, keepdims=keepdims)

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, ta.shape).copy(),)

    return record_op("mean", np.asarray(out), (ta,), adjoint)


def reshape(a: Operand, shape: Sequence[int]) -> Tensor:
    ta = as_tensor(a)
    try:
        out = ta.data.reshape(tuple(shape))
    except ValueError:
        raise DimensionError(f"reshape: cannot view {ta.shape} as {tuple(shape)}") from None

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(ta.shape),)

    return record_op("reshape", out.copy(), (ta,), adjoint)


def flatten(a: Operand, start_axis: int = 0) -> Tensor:
    """Collapse ``start_axis`` and every later axis into one."""
    ta = as_tensor(a)
    return reshape(ta, (*ta.shape[:start_axis], -1))


def transpose(a: Operand, axes: Sequence[int] | None = None) -> Tensor:
    """Permute axes; by default swap the last two."""
    ta = as_tensor(a)
    if axes is None:
        if ta.ndim < 2:
            raise DimensionError(f"transpose: needs at least 2 axes, got shape {ta.shape}")
        perm = list(range(ta.ndim))
        perm[-2], perm[-1] = perm[-1], perm[-2]
    else:
        perm = list(axes)
        if sorted(perm) != list(range(ta.ndim)):
            raise DimensionError(f"transpose: {perm} is not a permutation of {ta.ndim} axes")
    inverse = list(np.argsort(perm))

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.transpose(g, inverse),)

    return record_op("transpose", np.ascontiguousarray(np.transpose(ta.data, perm)), (ta,), adjoint)


def concat(tensors: Sequence[Operand], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    if not parts:
        raise DimensionError("concat: nothing to concatenate")
    _same_precision(*parts)
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        shapes = ", ".join(str(p.shape) for p in parts)
        raise DimensionError(f"concat: incompatible shapes {shapes} on axis {axis}") from None
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def adjoint(g: np.ndarray) -> list[np.ndarray]:
        return [piece.copy() for piece in np.split(g, bounds, axis=axis)]

    return record_op("concat", out, tuple(parts), adjoint)


def softmax_rows(x: Operand) -> Tensor:
    """Softmax along the last axis, computed after subtracting the row maximum."""
    tx = as_tensor(x)
    shifted = tx.data - tx.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return record_op("softmax_rows", s, (tx,), adjoint)


def layer_norm(
    x: Operand, gain: Operand, shift: Operand, eps: float = LAYER_NORM_EPS
) -> Tensor:
    """Normalize each row to zero mean and unit population variance, then apply gain/shift."""
    tx, tg, tb = as_tensor(x), as_tensor(gain), as_tensor(shift)
    n = tx.shape[-1] if tx.ndim else 0
    if n < 2:
        raise DimensionError(f"layer_norm: rows need at least 2 entries, got shape {tx.shape}")
    if tg.shape != (n,) or tb.shape != (n,):
        raise DimensionError(
            f"layer_norm: gain {tg.shape} and shift {tb.shape} must both be ({n},)"
        )
    _same_precision(tx, tg, tb)
    mu = tx.data.mean(axis=-1, keepdims=True)
    centered = tx.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + tx.data.dtype.type(eps))
    xhat = centered * inv
    out = xhat * tg.data + tb.data

    def adjoint(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lead = tuple(range(g.ndim - 1))
        g_gain = (g * xhat).sum(axis=lead)
        g_shift = g.sum(axis=lead)
        gh = g * tg.data
        gx = inv * (
            gh
            - gh.mean(axis=-1, keepdims=True)
            - xhat * (gh * xhat).mean(axis=-1, keepdims=True)
        )
        return gx, g_gain, g_shift

    return record_op("layer_norm", out, (tx, tg, tb), adjoint)


def gelu(x: Operand) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    tx = as_tensor(x)
    v = tx.data
    t = np.tanh(_GELU_C * (v + _GELU_K * v**3))
    out = 0.5 * v * (1.0 + t)

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        du = _GELU_C * (1.0 + 3.0 * _GELU_K * v * v)
        return (g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du),)

    return record_op("gelu", out.astype(v.dtype, copy=False), (tx,), adjoint)


def _check_labels(labels: Sequence[int] | np.ndarray, batch: int, classes: int) -> np.ndarray:
    idx = np.asarray(labels)
    if idx.ndim != 1 or idx.shape[0] != batch:
        raise DimensionError(f"expected {batch} labels, got shape {idx.shape}")
    if idx.size and not np.issubdtype(idx.dtype, np.integer):
        raise LabelIndexError(f"labels must be integers, got dtype {idx.dtype}")
    if idx.size and (idx.min() < 0 or idx.max() >= classes):
        raise LabelIndexError(f"labels must lie in [0, {classes}), got [{idx.min()}, {idx.max()}]")
    return idx.astype(np.intp)


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Log-softmax along the last axis via log-sum-exp (plain arrays, no tape)."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def per_sample_cross_entropy(logits: np.ndarray, labels: Sequence[int] | np.ndarray) -> np.ndarray:
    """-log softmax(logits)[label] for every row (plain arrays, no tape)."""
    if logits.ndim != 2:
        raise DimensionError(f"logits must be B x M, got shape {logits.shape}")
    idx = _check_labels(labels, logits.shape[0], logits.shape[1])
    return -log_softmax_rows(logits)[np.arange(logits.shape[0]), idx]


def cross_entropy(logits: Operand, labels: Sequence[int] | np.ndarray) -> Tensor:
    """Mean categorical cross-entropy of B x M logits against integer labels."""
    tl = as_tensor(logits)
    losses = per_sample_cross_entropy(tl.data, labels)
    idx = _check_labels(labels, tl.shape[0], tl.shape[1])
    batch = tl.shape[0]
    out = np.asarray(losses.mean(), dtype=tl.data.dtype)

    def adjoint(g: np.ndarray) -> tuple[np.ndarray]:
        probs = np.exp(log_softmax_rows(tl.data))
        probs[np.arange(batch), idx] -= 1.0
        return (probs * (g / batch),)

    return record_op("cross_entropy", out, (tl,), adjoint)
