"""Independent reference implementations used as test oracles.

Everything in this module is written by definition (nested loops, sorting,
quadrature-free closed forms) and deliberately shares no code with the
library paths it checks.
"""

import numpy as np


def finite_difference_grad(f, x, step=1e-3):
    """Central finite-difference gradient of scalar f() w.r.t. array x.

    f reads x in place, so elements are perturbed and restored one at a time.
    """
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        f_plus = f()
        flat[i] = orig - step
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric, floor=1e-3):
    """max over elements of |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom))


def conv2d_direct(x, w, b, stride=1, dilation=1, padding=0):
    """Convolution by definition: loop every output element and kernel tap."""
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    oh = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    ow = (wd + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((n, o, oh, ow), dtype=np.float64)
    for ni in range(n):
        for oi in range(o):
            for y in range(oh):
                for xo in range(ow):
                    acc = float(b[oi])
                    for ci in range(c):
                        for i in range(kh):
                            for j in range(kw):
                                yy = y * stride + i * dilation - padding
                                xx = xo * stride + j * dilation - padding
                                if 0 <= yy < h and 0 <= xx < wd:
                                    acc += x[ni, ci, yy, xx] * w[oi, ci, i, j]
                    out[ni, oi, y, xo] = acc
    return out


def bilinear_direct(x, factor):
    """Per-output-pixel bilinear interpolation, half-pixel-centre convention."""
    n, c, h, w = x.shape
    oh, ow = h * factor, w * factor
    out = np.zeros((n, c, oh, ow), dtype=np.float64)
    for y in range(oh):
        sy = (y + 0.5) / factor - 0.5
        y0 = int(np.floor(sy))
        fy = sy - y0
        y0c = min(max(y0, 0), h - 1)
        y1c = min(max(y0 + 1, 0), h - 1)
        for xo in range(ow):
            sx = (xo + 0.5) / factor - 0.5
            x0 = int(np.floor(sx))
            fx = sx - x0
            x0c = min(max(x0, 0), w - 1)
            x1c = min(max(x0 + 1, 0), w - 1)
            out[:, :, y, xo] = ((1 - fy) * (1 - fx) * x[:, :, y0c, x0c]
                                + (1 - fy) * fx * x[:, :, y0c, x1c]
                                + fy * (1 - fx) * x[:, :, y1c, x0c]
                                + fy * fx * x[:, :, y1c, x1c])
    return out


def quantile_by_sorting(samples, q):
    """Empirical quantile via an explicit sorted-order walk (linear interp)."""
    s = np.sort(np.asarray(samples, dtype=np.float64))
    if s.size == 1:
        return float(s[0])
    pos = q * (s.size - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, s.size - 1)
    frac = pos - lo
    return float(s[lo] * (1 - frac) + s[hi] * frac)


def metrics_by_recount(pred, gt, num_classes):
    """Pixel accuracy and mean IoU by explicit per-pixel counting.

    Classes absent from both prediction and ground truth are skipped in the
    mean, matching the library's convention.
    """
    pred = np.asarray(pred).reshape(-1)
    gt = np.asarray(gt).reshape(-1)
    correct = int((pred == gt).sum())
    pix_acc = correct / gt.size
    ious = []
    for k in range(num_classes):
        tp = int(((pred == k) & (gt == k)).sum())
        fp = int(((pred == k) & (gt != k)).sum())
        fn = int(((pred != k) & (gt == k)).sum())
        if tp + fp + fn == 0:
            continue
        ious.append(tp / (tp + fp + fn))
    return pix_acc, float(np.mean(ious))


def histogram_by_counting(samples, lo, hi, bins):
    """Clamped-edge histogram by looping samples one at a time."""
    counts = np.zeros(bins, dtype=np.int64)
    width = (hi - lo) / bins
    for v in np.asarray(samples, dtype=np.float64).reshape(-1):
        idx = int(np.floor((v - lo) / width))
        counts[min(max(idx, 0), bins - 1)] += 1
    return counts
