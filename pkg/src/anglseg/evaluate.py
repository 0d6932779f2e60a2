"""Evaluation over scene records: per-view metrics and multi-view fusion.

Predictions always come from the fine logits.  Fusion is per-pixel majority
voting over the views' argmax labels, with ties broken by the summed
softmax probability of the tied classes and then by the lowest class id.
"""

import numpy as np

from .metrics import ConfusionMatrix, compute_metrics
from .model import pad_to_stride
from .tensor import Tensor


def softmax(logits, axis=0):
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def predict_logits(model, image, dense):
    """Fine logits K x H x W for one view, padding handled internally."""
    model.eval()
    img, (h, w) = pad_to_stride(np.asarray(image, dtype=np.float32))
    x = Tensor(img[None, None, :, :])
    d = None
    if model.config.use_histogram:
        den, _ = pad_to_stride(np.asarray(dense, dtype=np.float32))
        d = Tensor(den[None, :, :, :])
    acts = model.forward(x, d)
    return acts.fine.data[0, :, :h, :w]


def fuse_views(logits=None, labels=None):
    """Fused label map from V per-view logits [V,K,H,W] or labels [V,H,W].

    With logits, ties among equally voted classes go to the class with the
    larger summed probability; hard labels fall straight to the lowest-id
    rule.
    """
    if (logits is None) == (labels is None):
        raise ValueError("pass exactly one of logits or labels")
    if logits is not None:
        logits = np.asarray(logits)
        if logits.ndim != 4:
            raise ValueError(f"expected [V,K,H,W] logits, got {logits.shape}")
        votes = logits.argmax(axis=1)
        k = logits.shape[1]
    else:
        votes = np.asarray(labels)
        if votes.ndim != 3:
            raise ValueError(f"expected [V,H,W] labels, got {votes.shape}")
        k = int(votes.max()) + 1
    counts = np.stack([(votes == c).sum(axis=0) for c in range(k)])
    top = counts.max(axis=0)
    tied = counts == top
    if logits is not None:
        prob_sum = softmax(logits, axis=1).sum(axis=0)
        score = np.where(tied, prob_sum, -1.0)
    else:
        score = tied.astype(np.float64)
    return score.argmax(axis=0)


def evaluate_per_view(model, records, num_classes):
    """One confusion matrix over every (scene, view) pair."""
    cm = ConfusionMatrix(num_classes)
    for rec in records:
        for j in range(rec.num_views):
            logits = predict_logits(model, rec.images[j], rec.dense)
            cm.update(rec.view_labels[j], logits.argmax(axis=0))
    return compute_metrics(cm)


def evaluate_single_views(model, records, num_classes):
    """Metrics per view slot: view j of every scene evaluated together."""
    num_views = records[0].num_views
    mats = [ConfusionMatrix(num_classes) for _ in range(num_views)]
    for rec in records:
        if rec.num_views != num_views:
            raise ValueError("records disagree on view count")
        for j in range(rec.num_views):
            logits = predict_logits(model, rec.images[j], rec.dense)
            mats[j].update(rec.view_labels[j], logits.argmax(axis=0))
    return [compute_metrics(m) for m in mats]


def evaluate_fused(model, records, num_classes):
    """Fuse each scene's views by voting, then score against full labels."""
    cm = ConfusionMatrix(num_classes)
    for rec in records:
        logits = np.stack([predict_logits(model, rec.images[j], rec.dense)
                           for j in range(rec.num_views)])
        fused = fuse_views(logits=logits)
        cm.update(rec.labels, fused)
    return compute_metrics(cm)
