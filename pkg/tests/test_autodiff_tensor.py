"""Tests for vitctl.autodiff.tensor."""

from __future__ import annotations

import numpy as np
import pytest

from vitctl.autodiff import ops
from vitctl.autodiff.tensor import (
    Parameter,
    Tape,
    Tensor,
    active_tape,
    backward,
    no_record,
    zero_grad,
)
from vitctl.exceptions import DimensionError, NonFiniteError, TapeError
from vitctl.models import Precision


class TestTensor:
    def test_infers_float64_from_python_data(self):
        t = Tensor([[1, 2], [3, 4]])
        assert t.shape == (2, 2)
        assert t.precision == Precision.FLOAT64

    def test_explicit_precision(self):
        t = Tensor([1.0, 2.0], Precision.FLOAT32)
        assert t.data.dtype == np.float32

    def test_keeps_float32_input(self):
        t = Tensor(np.ones(3, dtype=np.float32))
        assert t.precision == Precision.FLOAT32

    def test_data_is_read_only(self):
        t = Tensor([1.0, 2.0])
        with pytest.raises(ValueError):
            t.data[0] = 5.0

    def test_copies_source_array(self):
        src = np.array([1.0, 2.0])
        t = Tensor(src)
        src[0] = 9.0
        assert t.data[0] == 1.0

    def test_numpy_returns_writable_copy(self):
        t = Tensor([1.0])
        arr = t.numpy()
        arr[0] = 3.0
        assert t.item() == 1.0

    def test_rejects_nan(self):
        with pytest.raises(NonFiniteError):
            Tensor([1.0, np.nan])

    def test_rejects_inf(self):
        with pytest.raises(NonFiniteError):
            Tensor([np.inf])

    def test_item_needs_single_element(self):
        with pytest.raises(DimensionError):
            Tensor([1.0, 2.0]).item()

    def test_operators(self):
        a = Tensor([1.0, 2.0])
        b = Tensor([3.0, 5.0])
        assert np.array_equal((a + b).data, [4.0, 7.0])
        assert np.array_equal((b - a).data, [2.0, 3.0])
        assert np.array_equal((a * b).data, [3.0, 10.0])
        assert np.array_equal((a * 2.0).data, [2.0, 4.0])
        assert np.array_equal((-a).data, [-1.0, -2.0])


class TestParameter:
    def test_gradient_starts_zero_with_same_shape(self):
        p = Parameter("w", np.ones((2, 3)))
        assert p.grad.shape == (2, 3)
        assert not p.grad.data.any()

    def test_assign_keeps_precision(self):
        p = Parameter("w", np.ones(2), Precision.FLOAT32)
        p.assign(np.array([1.5, 2.5]))
        assert p.value.data.dtype == np.float32
        assert np.array_equal(p.value.data, [1.5, 2.5])

    def test_assign_wrong_shape(self):
        p = Parameter("w", np.ones(2))
        with pytest.raises(DimensionError, match="w"):
            p.assign(np.ones(3))

    def test_accumulate_and_zero(self):
        p = Parameter("w", np.ones(2))
        p.accumulate(np.array([1.0, 2.0]))
        p.accumulate(np.array([1.0, 2.0]))
        assert np.array_equal(p.grad.data, [2.0, 4.0])
        zero_grad([p])
        assert not p.grad.data.any()


class TestTape:
    def test_sum_of_squares_gradient(self):
        x = Parameter("x", np.array([1.0, 2.0]))
        with Tape():
            loss = ops.sum(ops.mul(x, x))
        backward(loss)
        assert np.allclose(x.grad.data, [2.0, 4.0])

    def test_unused_parameter_gradient_stays_zero(self):
        x = Parameter("x", np.array([1.0, 2.0]))
        unused = Parameter("u", np.array([3.0]))
        with Tape():
            loss = ops.sum(x)
            _ = unused.value
        backward(loss)
        assert not unused.grad.data.any()

    def test_parameter_used_twice_accumulates(self):
        x = Parameter("x", np.array([3.0]))
        with Tape():
            loss = ops.sum(ops.add(ops.scale(x, 2.0), x))
        backward(loss)
        assert np.allclose(x.grad.data, [3.0])

    def test_double_backward_raises(self):
        x = Parameter("x", np.array([1.0]))
        with Tape():
            loss = ops.sum(x)
        backward(loss)
        with pytest.raises(TapeError, match="already"):
            backward(loss)

    def test_replayed_tape_cannot_record_again(self):
        tape = Tape()
        x = Parameter("x", np.array([1.0]))
        with tape:
            loss = ops.sum(x)
        backward(loss)
        with pytest.raises(TapeError):
            with tape:
                pass

    def test_unrecorded_loss_raises(self):
        loss = ops.sum(Tensor([1.0, 2.0]))
        with pytest.raises(TapeError, match="not produced"):
            backward(loss)

    def test_non_scalar_loss_raises(self):
        x = Parameter("x", np.array([1.0, 2.0]))
        with Tape():
            out = ops.scale(x, 2.0)
        with pytest.raises(TapeError, match="scalar"):
            backward(out)

    def test_tape_is_restored_after_context(self):
        assert active_tape() is None
        with Tape() as tape:
            assert active_tape() is tape
        assert active_tape() is None

    def test_no_record_suspends_tape(self):
        x = Parameter("x", np.array([1.0]))
        with Tape() as tape:
            with no_record():
                ops.sum(x)
            assert len(tape) == 0
            ops.sum(x)
            assert len(tape) == 1

    def test_parameters_listed_in_first_use_order(self):
        a = Parameter("a", np.array([1.0]))
        b = Parameter("b", np.array([2.0]))
        with Tape() as tape:
            ops.add(b, a)
        assert [p.name for p in tape.parameters] == ["b", "a"]

    def test_backward_is_deterministic(self):
        rng = np.random.default_rng(1)
        w = Parameter("w", rng.standard_normal((4, 3)))
        x = Tensor(rng.standard_normal((5, 4)))
        grads = []
        for _ in range(2):
            w.zero_grad()
            with Tape():
                loss = ops.sum(ops.gelu(ops.matmul(x, w)))
            backward(loss)
            grads.append(w.grad.numpy())
        assert np.array_equal(grads[0], grads[1])
