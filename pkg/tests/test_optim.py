"""Momentum SGD update arithmetic and the polynomial schedule."""

import numpy as np
import pytest

from anglseg.tensor import Tensor
from anglseg.optim import SgdMomentum, OptimError, poly_lr


def _param(value):
    t = Tensor(np.array([value], dtype=np.float32), requires_grad=True)
    t.grad = np.array([1.0], dtype=np.float32)
    return t


def test_plain_step():
    p = _param(1.0)
    opt = SgdMomentum({"p": p}, lr=0.1, momentum=0.0, weight_decay=0.0)
    opt.step()
    assert p.data[0] == pytest.approx(0.9)
    assert p.grad is None


def test_momentum_accumulates_velocity():
    # Two identical unit gradients: velocity 1 then 1.9, deltas 0.1 and 0.19.
    p = _param(1.0)
    opt = SgdMomentum({"p": p}, lr=0.1, momentum=0.9)
    opt.step()
    assert p.data[0] == pytest.approx(0.9)
    p.grad = np.array([1.0], dtype=np.float32)
    opt.step()
    assert p.data[0] == pytest.approx(0.9 - 0.19)


def test_weight_decay_equals_added_gradient():
    decay = 0.05
    p1 = _param(2.0)
    opt1 = SgdMomentum({"p": p1}, lr=0.1, momentum=0.9, weight_decay=decay)
    opt1.step()

    p2 = _param(2.0)
    p2.grad = p2.grad + decay * p2.data
    opt2 = SgdMomentum({"p": p2}, lr=0.1, momentum=0.9, weight_decay=0.0)
    opt2.step()
    np.testing.assert_allclose(p1.data, p2.data, rtol=1e-7)


def test_nonfinite_gradient_aborts_before_update():
    p = _param(1.0)
    q = _param(1.0)
    q.grad = np.array([np.nan], dtype=np.float32)
    opt = SgdMomentum({"p": p, "q": q}, lr=0.1)
    with pytest.raises(OptimError, match="q"):
        opt.step()
    assert p.data[0] == 1.0  # nothing moved


def test_missing_gradient_is_an_error():
    p = Tensor(np.zeros(1, dtype=np.float32), requires_grad=True)
    opt = SgdMomentum({"p": p}, lr=0.1)
    with pytest.raises(OptimError, match="no gradient"):
        opt.step()


def test_poly_lr_endpoints_and_monotone():
    assert poly_lr(0.01, 0, 100) == pytest.approx(0.01)
    assert poly_lr(0.01, 100, 100) == 0.0
    values = [poly_lr(0.01, i, 100, power=0.9) for i in range(101)]
    assert all(a >= b for a, b in zip(values, values[1:]))
