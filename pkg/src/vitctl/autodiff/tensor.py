"""Dense tensors, trainable parameters and the reverse-mode tape.

A :class:`Tensor` is an immutable, finite floating-point array. Operations in
:mod:`vitctl.autodiff.ops` append a node to the tape that is active in the current
context (``with Tape() as tape: ...``); :func:`backward` replays those nodes in reverse
and accumulates gradients into every :class:`Parameter` the forward pass touched.
Tapes live in a :class:`~contextvars.ContextVar`, so each thread records its own.
"""

from __future__ import annotations

import logging
from collections.abc import Callable, Iterable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar, Token
from typing import Any

import numpy as np

from vitctl.exceptions import DimensionError, NonFiniteError, TapeError, TensorError
from vitctl.models import Precision

logger = logging.getLogger(__name__)

Adjoint = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

_ACTIVE_TAPE: ContextVar[Tape | None] = ContextVar("vitctl_active_tape", default=None)

_FLOAT_DTYPES = (np.dtype("float32"), np.dtype("float64"))


def _check_finite(data: np.ndarray, where: str) -> None:
    if not np.isfinite(data).all():
        bad = int(np.size(data) - np.count_nonzero(np.isfinite(data)))
        raise NonFiniteError(f"{where} produced {bad} non-finite value(s)")


class Tensor:
    """Immutable dense array of 32- or 64-bit floats."""

    __slots__ = ("_data", "_tape")

    def __init__(self, data: Any, precision: Precision | str | None = None) -> None:
        if precision is None:
            given = np.asarray(data)
            dtype = given.dtype if given.dtype in _FLOAT_DTYPES else np.dtype("float64")
        else:
            dtype = Precision(precision).dtype
        arr = np.array(data, dtype=dtype)
        _check_finite(arr, "Tensor construction")
        arr.setflags(write=False)
        self._data = arr
        self._tape: Tape | None = None

    @classmethod
    def _wrap(cls, data: np.ndarray, tape: Tape | None) -> Tensor:
        out = cls.__new__(cls)
        data.setflags(write=False)
        out._data = data
        out._tape = tape
        return out

    @property
    def data(self) -> np.ndarray:
        """Read-only view of the values."""
        return self._data

    @property
    def shape(self) -> tuple[int, ...]:
        return self._data.shape

    @property
    def ndim(self) -> int:
        return self._data.ndim

    @property
    def size(self) -> int:
        return int(self._data.size)

    @property
    def precision(self) -> Precision:
        return Precision(self._data.dtype.name)

    def numpy(self) -> np.ndarray:
        """Writable copy of the values."""
        return self._data.copy()

    def item(self) -> float:
        if self._data.size != 1:
            raise DimensionError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self._data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, precision={self.precision.value})"

    def __add__(self, other: Operand) -> Tensor:
        from vitctl.autodiff import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Operand) -> Tensor:
        from vitctl.autodiff import ops

        return ops.sub(self, other)

    def __mul__(self, other: Operand | float) -> Tensor:
        from vitctl.autodiff import ops

        if isinstance(other, (int, float)):
            return ops.scale(self, float(other))
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> Tensor:
        from vitctl.autodiff import ops

        return ops.scale(self, -1.0)

    def __matmul__(self, other: Operand) -> Tensor:
        from vitctl.autodiff import ops

        return ops.matmul(self, other)


class Parameter:
    """Named trainable tensor with a gradient accumulator of the same shape."""

    __slots__ = ("name", "value", "grad")

    def __init__(
        self, name: str, value: Tensor | np.ndarray, precision: Precision | str | None = None
    ) -> None:
        self.name = name
        self.value = value if isinstance(value, Tensor) else Tensor(value, precision)
        self.grad = Tensor._wrap(np.zeros_like(self.value.data), None)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    @property
    def precision(self) -> Precision:
        return self.value.precision

    def assign(self, data: np.ndarray) -> None:
        """Replace the value, keeping shape and precision."""
        arr = np.asarray(data, dtype=self.value.data.dtype)
        if arr.shape != self.shape:
            raise DimensionError(f"cannot assign shape {arr.shape} to {self.name} {self.shape}")
        self.value = Tensor(arr)

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.shape:
            raise DimensionError(
                f"gradient shape {grad.shape} does not match {self.name} {self.shape}"
            )
        self.grad = Tensor._wrap(self.grad.data + grad.astype(self.grad.data.dtype), None)

    def zero_grad(self) -> None:
        self.grad = Tensor._wrap(np.zeros_like(self.value.data), None)

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


Operand = Tensor | Parameter


class _Node:
    __slots__ = ("output", "inputs", "adjoint", "op")

    def __init__(
        self, output: Tensor, inputs: tuple[Tensor, ...], adjoint: Adjoint, op: str
    ) -> None:
        self.output = output
        self.inputs = inputs
        self.adjoint = adjoint
        self.op = op


class Tape:
    """Ordered record of executed operations, replayable once."""

    def __init__(self) -> None:
        self._nodes: list[_Node] = []
        self._leaves: dict[int, Parameter] = {}
        self._replayed = False
        self._token: Token[Tape | None] | None = None

    def __enter__(self) -> Tape:
        if self._replayed:
            raise TapeError("tape was already replayed; start a new Tape to record again")
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc: object) -> None:
        if self._token is not None:
            _ACTIVE_TAPE.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def replayed(self) -> bool:
        return self._replayed

    @property
    def parameters(self) -> list[Parameter]:
        """Parameters read while recording, in first-use order."""
        return list(self._leaves.values())

    def watch(self, param: Parameter) -> Tensor:
        self._leaves.setdefault(id(param.value), param)
        return param.value

    def record(self, output: Tensor, inputs: tuple[Tensor, ...], adjoint: Adjoint, op: str) -> None:
        if self._replayed:
            raise TapeError("cannot record on a tape that was already replayed")
        self._nodes.append(_Node(output, inputs, adjoint, op))

    def backward(self, loss: Tensor) -> None:
        """Propagate d(loss)/d(.) to every watched parameter."""
        if self._replayed:
            raise TapeError("backward already ran on this tape; re-record the forward pass")
        if loss._tape is not self:
            raise TapeError("loss was not recorded on this tape")
        if loss.size != 1:
            raise TapeError(f"loss must be a scalar, got shape {loss.shape}")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self._nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for inp, ig in zip(node.inputs, node.adjoint(g)):
                if ig is None:
                    continue
                key = id(inp)
                grads[key] = grads[key] + ig if key in grads else ig

        for key, param in self._leaves.items():
            g = grads.get(key)
            if g is not None:
                param.accumulate(g)
        logger.debug("Replayed %d nodes into %d parameters", len(self._nodes), len(self._leaves))
        self._replayed = True
        self._nodes.clear()


def active_tape() -> Tape | None:
    return _ACTIVE_TAPE.get()


def as_tensor(x: Operand) -> Tensor:
    """Resolve an operand, registering parameters with the active tape."""
    if isinstance(x, Parameter):
        tape = _ACTIVE_TAPE.get()
        return tape.watch(x) if tape is not None else x.value
    if isinstance(x, Tensor):
        return x
    raise TensorError(f"expected Tensor or Parameter, got {type(x).__name__}")


def record_op(op: str, data: np.ndarray, inputs: tuple[Tensor, ...], adjoint: Adjoint) -> Tensor:
    """Wrap an operation result and append it to the active tape."""
    _check_finite(data, op)
    tape = _ACTIVE_TAPE.get()
    out = Tensor._wrap(data, tape)
    if tape is not None:
        tape.record(out, inputs, adjoint, op)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate gradients of a scalar loss into the parameters it depends on."""
    if loss._tape is None:
        raise TapeError("loss was not produced while a Tape was recording")
    loss._tape.backward(loss)


def zero_grad(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()


@contextmanager
def no_record() -> Iterator[None]:
    """Suspend the active tape; operations inside are evaluated but not recorded."""
    token = _ACTIVE_TAPE.set(None)
    try:
        yield
    finally:
        _ACTIVE_TAPE.reset(token)
