"""Finite-difference gradient suite shared by the unit and acceptance tests.

Each case builds float64 inputs, runs the library op to a scalar readout,
and compares every analytic input gradient against central finite
differences computed by the oracle.  Inputs that sit within two steps of a
ReLU kink are nudged away so the difference quotient stays on one side.
"""

import zlib

import numpy as np

from anglseg.tensor import Tensor, add, mul, relu, scale, concat_channels, sum_all
from anglseg.nnops import (ConvSpec, conv2d, batch_norm, BatchNormState,
                           avg_pool2d, bilinear_upsample, softmax_cross_entropy)

from oracles import finite_difference_grad, max_relative_error

STEP = 1e-3
TOL = 1e-3


def _rand(rng, shape, away_from_zero=False):
    x = rng.standard_normal(shape)
    if away_from_zero:
        x = x + np.sign(x) * 2.5 * STEP
    return np.ascontiguousarray(x)


def _readout(rng, shape):
    """Fixed random projection weights making any output a scalar loss."""
    return Tensor(rng.uniform(-1.0, 1.0, size=shape), dtype=np.float64)


def _check(forward, inputs):
    """Return max relative FD error over all requires-grad inputs."""
    out = forward()
    for t in inputs:
        t.zero_grad()
    out = forward()
    out.backward()
    worst = 0.0
    for t in inputs:
        numeric = finite_difference_grad(lambda: forward().item(), t.data, step=STEP)
        worst = max(worst, max_relative_error(t.grad, numeric))
    return worst


def case_conv2d(rng):
    n = int(rng.integers(1, 3))
    c = int(rng.integers(1, 4))
    o = int(rng.integers(1, 4))
    kh, kw = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    stride = int(rng.integers(1, 3))
    dilation = int(rng.integers(1, 3))
    padding = int(rng.integers(0, 3))
    h = int(rng.integers(2, 5))
    w = int(rng.integers(2, 5))
    spec = ConvSpec(c, o, (kh, kw), stride, dilation, padding)
    oh, ow = spec.out_size(h, w)
    if oh < 1 or ow < 1:
        spec = ConvSpec(c, o, (kh, kw), stride, dilation, padding=max(kh, kw))
        oh, ow = spec.out_size(h, w)
    x = Tensor(_rand(rng, (n, c, h, w)), requires_grad=True, dtype=np.float64)
    wt = Tensor(_rand(rng, (o, c, kh, kw)), requires_grad=True, dtype=np.float64)
    b = Tensor(_rand(rng, (o,)), requires_grad=True, dtype=np.float64)
    ro = _readout(rng, (n, o, oh, ow))
    return lambda: sum_all(mul(conv2d(x, wt, b, spec), ro)), [x, wt, b]


def case_batch_norm_train(rng):
    n, c, h, w = 2, int(rng.integers(1, 4)), 3, 3
    x = Tensor(_rand(rng, (n, c, h, w)), requires_grad=True, dtype=np.float64)
    g = Tensor(rng.uniform(0.5, 1.5, c), requires_grad=True, dtype=np.float64)
    b = Tensor(_rand(rng, (c,)), requires_grad=True, dtype=np.float64)
    ro = _readout(rng, (n, c, h, w))

    def forward():
        # Fresh state per evaluation keeps the loss a pure function of inputs.
        state = BatchNormState(c, dtype=np.float64)
        return sum_all(mul(batch_norm(x, g, b, state, training=True), ro))

    return forward, [x, g, b]


def case_batch_norm_eval(rng):
    n, c, h, w = 2, int(rng.integers(1, 4)), 3, 3
    x = Tensor(_rand(rng, (n, c, h, w)), requires_grad=True, dtype=np.float64)
    g = Tensor(rng.uniform(0.5, 1.5, c), requires_grad=True, dtype=np.float64)
    b = Tensor(_rand(rng, (c,)), requires_grad=True, dtype=np.float64)
    state = BatchNormState(c, dtype=np.float64)
    state.running_mean = rng.standard_normal(c)
    state.running_var = rng.uniform(0.5, 2.0, c)
    ro = _readout(rng, (n, c, h, w))
    return (lambda: sum_all(mul(batch_norm(x, g, b, state, training=False), ro)),
            [x, g, b])


def case_bilinear(rng):
    n, c = 1, int(rng.integers(1, 3))
    h, w = int(rng.integers(2, 5)), int(rng.integers(2, 5))
    factor = int(rng.integers(2, 4))
    x = Tensor(_rand(rng, (n, c, h, w)), requires_grad=True, dtype=np.float64)
    ro = _readout(rng, (n, c, h * factor, w * factor))
    return lambda: sum_all(mul(bilinear_upsample(x, factor), ro)), [x]


def case_avg_pool(rng):
    n, c = 1, int(rng.integers(1, 3))
    k = int(rng.integers(1, 3))
    stride = int(rng.integers(1, 3))
    h = int(rng.integers(k, 5))
    w = int(rng.integers(k, 5))
    oh = (h - k) // stride + 1
    ow = (w - k) // stride + 1
    x = Tensor(_rand(rng, (n, c, h, w)), requires_grad=True, dtype=np.float64)
    ro = _readout(rng, (n, c, oh, ow))
    return lambda: sum_all(mul(avg_pool2d(x, k, stride), ro)), [x]


def case_relu(rng):
    shape = (2, 2, int(rng.integers(2, 5)), int(rng.integers(2, 5)))
    x = Tensor(_rand(rng, shape, away_from_zero=True), requires_grad=True,
               dtype=np.float64)
    ro = _readout(rng, shape)
    return lambda: sum_all(mul(relu(x), ro)), [x]


def case_add(rng):
    shape = (2, int(rng.integers(1, 4)), 3, 3)
    a = Tensor(_rand(rng, shape), requires_grad=True, dtype=np.float64)
    b = Tensor(_rand(rng, shape), requires_grad=True, dtype=np.float64)
    ro = _readout(rng, shape)
    return lambda: sum_all(mul(add(a, b), ro)), [a, b]


def case_mul(rng):
    shape = (2, int(rng.integers(1, 4)), 3, 3)
    a = Tensor(_rand(rng, shape), requires_grad=True, dtype=np.float64)
    b = Tensor(_rand(rng, shape), requires_grad=True, dtype=np.float64)
    ro = _readout(rng, shape)
    return lambda: sum_all(mul(mul(a, b), ro)), [a, b]


def case_scale(rng):
    shape = (1, 2, int(rng.integers(2, 5)), 3)
    s = float(rng.uniform(-2.0, 2.0))
    x = Tensor(_rand(rng, shape), requires_grad=True, dtype=np.float64)
    ro = _readout(rng, shape)
    return lambda: sum_all(mul(scale(x, s), ro)), [x]


def case_concat(rng):
    n, h, w = 1, 3, int(rng.integers(2, 5))
    parts = [Tensor(_rand(rng, (n, int(rng.integers(1, 4)), h, w)),
                    requires_grad=True, dtype=np.float64) for _ in range(3)]
    total_c = sum(p.shape[1] for p in parts)
    ro = _readout(rng, (n, total_c, h, w))
    return lambda: sum_all(mul(concat_channels(parts), ro)), parts


def case_sum_all(rng):
    shape = (2, 2, int(rng.integers(2, 5)), 2)
    x = Tensor(_rand(rng, shape), requires_grad=True, dtype=np.float64)
    return lambda: scale(sum_all(x), 0.5), [x]


def case_cross_entropy(rng):
    n, k, h, w = 1, int(rng.integers(2, 6)), 3, 3
    logits = Tensor(_rand(rng, (n, k, h, w)), requires_grad=True, dtype=np.float64)
    labels = rng.integers(0, k, size=(n, h, w))
    labels[0, 0, 0] = 255  # keep the ignore path on the tested surface
    return lambda: softmax_cross_entropy(logits, labels, ignore_index=255), [logits]


ALL_CASES = {
    "conv2d": case_conv2d,
    "batch_norm_train": case_batch_norm_train,
    "batch_norm_eval": case_batch_norm_eval,
    "bilinear_upsample": case_bilinear,
    "avg_pool2d": case_avg_pool,
    "relu": case_relu,
    "add": case_add,
    "mul": case_mul,
    "scale": case_scale,
    "concat_channels": case_concat,
    "sum_all": case_sum_all,
    "softmax_cross_entropy": case_cross_entropy,
}


def run_op(name, cases=20, seed=1234):
    """Run `cases` random gradient checks for one op; return the worst error."""
    rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
    worst = 0.0
    for _ in range(cases):
        forward, inputs = ALL_CASES[name](rng)
        worst = max(worst, _check(forward, inputs))
    return worst


def run_suite(cases=20, seed=1234):
    return {name: run_op(name, cases=cases, seed=seed) for name in ALL_CASES}
