"""Structured network operations: convolution, normalization, resampling, loss.

All operations take and return `Tensor` values and register their backward
pass with the autodiff graph.  Layouts are NCHW throughout.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, ShapeError, _require, _result


@dataclass(frozen=True)
class ConvSpec:
    """Static description of a 2-d convolution.

    Output height is floor((H + 2*padding - dilation*(kh-1) - 1)/stride) + 1,
    and analogously for width.
    """
    in_channels: int
    out_channels: int
    kernel: tuple
    stride: int = 1
    dilation: int = 1
    padding: int = 0

    def __post_init__(self):
        kh, kw = self.kernel
        if min(self.in_channels, self.out_channels, kh, kw,
               self.stride, self.dilation) < 1:
            raise ValueError(f"ConvSpec fields must be >= 1 (padding >= 0): {self}")
        if self.padding < 0:
            raise ValueError(f"ConvSpec padding must be >= 0: {self}")

    def out_size(self, h, w):
        kh, kw = self.kernel
        oh = (h + 2 * self.padding - self.dilation * (kh - 1) - 1) // self.stride + 1
        ow = (w + 2 * self.padding - self.dilation * (kw - 1) - 1) // self.stride + 1
        return oh, ow


def conv2d(x, weights, bias, spec):
    """2-d convolution (cross-correlation) with stride, dilation and padding.

    x: [N, C, H, W]; weights: [O, C, kh, kw]; bias: [O].
    Implemented as im2col plus one matrix product so the heavy lifting is a
    single BLAS call in each direction.
    """
    _require(x.ndim == 4, f"conv2d: input must be 4-d, got {x.ndim}-d")
    n, c, h, w = x.shape
    kh, kw = spec.kernel
    _require(c == spec.in_channels,
             f"conv2d: input channel axis is {c}, spec expects {spec.in_channels}")
    _require(weights.shape == (spec.out_channels, spec.in_channels, kh, kw),
             f"conv2d: weight shape {weights.shape} != "
             f"{(spec.out_channels, spec.in_channels, kh, kw)}")
    _require(bias.shape == (spec.out_channels,),
             f"conv2d: bias shape {bias.shape} != ({spec.out_channels},)")
    oh, ow = spec.out_size(h, w)
    _require(oh >= 1 and ow >= 1,
             f"conv2d: spatial input {h}x{w} too small for kernel {kh}x{kw} "
             f"(dilation {spec.dilation}, padding {spec.padding})")

    s, d, p = spec.stride, spec.dilation, spec.padding
    if p > 0:
        xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    else:
        xp = x.data
    # Effective kernel extent, then thin the window back down by the dilation.
    eh, ew = d * (kh - 1) + 1, d * (kw - 1) + 1
    win = sliding_window_view(xp, (eh, ew), axis=(2, 3))
    win = win[:, :, ::s, ::s, ::d, ::d][:, :, :oh, :ow]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    wmat = weights.data.reshape(spec.out_channels, c * kh * kw)
    out = cols @ wmat.T + bias.data
    out = out.reshape(n, oh, ow, spec.out_channels).transpose(0, 3, 1, 2)

    def backward(grad):
        gmat = grad.transpose(0, 2, 3, 1).reshape(n * oh * ow, spec.out_channels)
        if weights.requires_grad:
            weights.accumulate_grad((gmat.T @ cols).reshape(weights.shape))
        if bias.requires_grad:
            bias.accumulate_grad(gmat.sum(axis=0))
        if x.requires_grad:
            dcols = (gmat @ wmat).reshape(n, oh, ow, c, kh, kw)
            dxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i * d:i * d + s * oh:s, j * d:j * d + s * ow:s] += \
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            x.accumulate_grad(dxp[:, :, p:p + h, p:p + w] if p > 0 else dxp)

    return _result(np.ascontiguousarray(out), (x, weights, bias), backward)


class BatchNormState:
    """Running statistics for one batch_norm site."""

    def __init__(self, channels, momentum=0.1, eps=1e-5, dtype=np.float32):
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self.momentum = momentum
        self.eps = eps


def batch_norm(x, gamma, beta, state, training):
    """Per-channel batch normalization over [N, C, H, W].

    Training mode normalizes with batch statistics and folds them into the
    running estimates; eval mode normalizes with the running estimates.  A
    constant channel is handled by the epsilon floor, never a zero division.
    """
    _require(x.ndim == 4, f"batch_norm: input must be 4-d, got {x.ndim}-d")
    n, c, h, w = x.shape
    _require(gamma.shape == (c,) and beta.shape == (c,),
             f"batch_norm: gamma/beta must have shape ({c},), "
             f"got {gamma.shape}/{beta.shape}")
    dt = x.data.dtype
    eps = dt.type(state.eps)
    m = n * h * w

    if training:
        _require(m >= 2, f"batch_norm: train mode needs N*H*W >= 2, got {m}")
        mean = x.data.mean(axis=(0, 2, 3), dtype=dt)
        var = x.data.var(axis=(0, 2, 3), dtype=dt)
        mom = state.momentum
        state.running_mean += mom * (mean.astype(state.running_mean.dtype)
                                     - state.running_mean)
        state.running_var += mom * (var.astype(state.running_var.dtype)
                                    - state.running_var)
    else:
        mean = state.running_mean.astype(dt)
        var = state.running_var.astype(dt)

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean[:, None, None]) * inv_std[:, None, None]
    out = gamma.data[:, None, None] * xhat + beta.data[:, None, None]

    def backward(grad):
        if gamma.requires_grad:
            gamma.accumulate_grad((grad * xhat).sum(axis=(0, 2, 3)))
        if beta.requires_grad:
            beta.accumulate_grad(grad.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gscaled = grad * gamma.data[:, None, None]
            if training:
                # d/dx of batch standardization: remove the mean response and
                # the projection onto xhat, then rescale.
                mean_g = gscaled.mean(axis=(0, 2, 3))
                mean_gx = (gscaled * xhat).mean(axis=(0, 2, 3))
                dx = (gscaled - mean_g[:, None, None]
                      - xhat * mean_gx[:, None, None]) * inv_std[:, None, None]
            else:
                dx = gscaled * inv_std[:, None, None]
            x.accumulate_grad(dx)

    return _result(out, (x, gamma, beta), backward)


def avg_pool2d(x, kernel, stride=None):
    """Average pooling with a square window; stride defaults to the window."""
    _require(x.ndim == 4, f"avg_pool2d: input must be 4-d, got {x.ndim}-d")
    k = int(kernel)
    s = k if stride is None else int(stride)
    _require(k >= 1 and s >= 1, f"avg_pool2d: kernel/stride must be >= 1, got {k}/{s}")
    n, c, h, w = x.shape
    _require(h >= k and w >= k,
             f"avg_pool2d: input {h}x{w} smaller than window {k}")
    oh = (h - k) // s + 1
    ow = (w - k) // s + 1
    inv = x.data.dtype.type(1.0 / (k * k))

    win = sliding_window_view(x.data, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    out = win[:, :, :oh, :ow].mean(axis=(4, 5), dtype=x.data.dtype)

    def backward(grad):
        dx = np.zeros_like(x.data)
        g = grad * inv
        for i in range(k):
            for j in range(k):
                dx[:, :, i:i + s * oh:s, j:j + s * ow:s] += g
        x.accumulate_grad(dx)

    return _result(np.ascontiguousarray(out), (x,), backward)


_bilinear_cache = {}


def _bilinear_matrix(n_in, factor, dtype):
    """Row-stochastic interpolation matrix [factor*n_in, n_in].

    Output sample i reads source coordinate (i + 0.5)/factor - 0.5 with
    edge replication (align-corners-false convention).
    """
    key = (n_in, factor, np.dtype(dtype).name)
    mat = _bilinear_cache.get(key)
    if mat is not None:
        return mat
    n_out = n_in * factor
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for i in range(n_out):
        src = (i + 0.5) / factor - 0.5
        i0 = int(np.floor(src))
        frac = src - i0
        lo = min(max(i0, 0), n_in - 1)
        hi = min(max(i0 + 1, 0), n_in - 1)
        mat[i, lo] += 1.0 - frac
        mat[i, hi] += frac
    mat = mat.astype(dtype)
    _bilinear_cache[key] = mat
    return mat


def bilinear_upsample(x, factor):
    """Bilinear upsampling of [N, C, H, W] by an integer factor."""
    _require(x.ndim == 4, f"bilinear_upsample: input must be 4-d, got {x.ndim}-d")
    factor = int(factor)
    _require(factor >= 1, f"bilinear_upsample: factor must be >= 1, got {factor}")
    if factor == 1:
        def backward_id(grad):
            x.accumulate_grad(grad)
        return _result(x.data.copy(), (x,), backward_id)

    n, c, h, w = x.shape
    mh = _bilinear_matrix(h, factor, x.data.dtype)
    mw = _bilinear_matrix(w, factor, x.data.dtype)
    # out[n,c,a,b] = sum_{i,j} mh[a,i] x[n,c,i,j] mw[b,j]
    out = np.einsum("ai,ncij,bj->ncab", mh, x.data, mw, optimize=True)

    def backward(grad):
        x.accumulate_grad(np.einsum("ai,ncab,bj->ncij", mh, grad, mw, optimize=True))

    return _result(np.ascontiguousarray(out.astype(x.data.dtype)), (x,), backward)


def softmax_cross_entropy(logits, labels, ignore_index=255):
    """Mean pixelwise cross entropy over non-ignored pixels.

    logits: [N, K, H, W]; labels: integer [N, H, W] with entries in
    {0..K-1} or equal to ignore_index.  Numerically stabilized by channel
    max subtraction.  If every pixel is ignored the loss is exactly zero
    with zero gradient and the returned tensor's ``all_ignored`` flag is
    set; ``valid_pixels`` always carries the contributing pixel count.
    """
    _require(logits.ndim == 4,
             f"softmax_cross_entropy: logits must be 4-d, got {logits.ndim}-d")
    n, k, h, w = logits.shape
    labels = np.asarray(labels)
    _require(labels.shape == (n, h, w),
             f"softmax_cross_entropy: labels shape {labels.shape} != {(n, h, w)}")
    valid = labels != ignore_index
    in_range = (labels >= 0) & (labels < k) | ~valid
    if not in_range.all():
        bad = int(labels[~in_range].reshape(-1)[0])
        raise ValueError(f"softmax_cross_entropy: label {bad} outside [0, {k})")
    count = int(valid.sum())

    dt = logits.data.dtype
    if count == 0:
        out = _result(np.zeros((), dtype=dt), (logits,), lambda grad: None)
        out.all_ignored = True
        out.valid_pixels = 0
        return out

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ez = np.exp(z)
    denom = ez.sum(axis=1, keepdims=True)
    log_probs = z - np.log(denom)
    safe = np.where(valid, labels, 0)
    picked = np.take_along_axis(log_probs, safe[:, None], axis=1)[:, 0]
    loss = -(picked * valid).sum(dtype=np.float64) / count

    def backward(grad):
        g = grad.reshape(-1)[0]
        softmax = ez / denom
        onehot_sub = softmax.copy()
        np.put_along_axis(
            onehot_sub, safe[:, None],
            np.take_along_axis(onehot_sub, safe[:, None], axis=1) - 1, axis=1)
        onehot_sub *= valid[:, None]
        logits.accumulate_grad((g / dt.type(count)) * onehot_sub)

    out = _result(np.asarray(loss, dtype=dt).reshape(()), (logits,), backward)
    out.all_ignored = False
    out.valid_pixels = count
    return out
