"""Reverse-mode automatic differentiation over dense numpy arrays."""

from vitctl.autodiff.ops import (
    add,
    concat,
    cross_entropy,
    flatten,
    gelu,
    layer_norm,
    matmul,
    mean,
    mul,
    reshape,
    scale,
    softmax_rows,
    sub,
    transpose,
)
from vitctl.autodiff.tensor import Parameter, Tape, Tensor, backward, no_record, zero_grad

__all__ = [
    "Parameter",
    "Tape",
    "Tensor",
    "add",
    "backward",
    "concat",
    "cross_entropy",
    "flatten",
    "gelu",
    "layer_norm",
    "matmul",
    "mean",
    "mul",
    "no_record",
    "reshape",
    "scale",
    "softmax_rows",
    "sub",
    "transpose",
    "zero_grad",
]
