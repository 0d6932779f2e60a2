"""Streaming segmentation metrics from a confusion matrix.

Rows are ground truth, columns are predictions.  Classes absent from both
sides of a split are excluded from the IoU mean rather than scored as 0/0.
"""

from dataclasses import dataclass

import numpy as np

IGNORE_INDEX = 255


class ConfusionMatrix:
    def __init__(self, num_classes):
        if num_classes < 1:
            raise ValueError("need at least one class")
        self.num_classes = num_classes
        self.matrix = np.zeros((num_classes, num_classes), dtype=np.int64)

    def update(self, labels, predictions):
        lab = np.asarray(labels).ravel()
        pred = np.asarray(predictions).ravel()
        if lab.shape != pred.shape:
            raise ValueError(f"label count {lab.size} != prediction count "
                             f"{pred.size}")
        keep = lab != IGNORE_INDEX
        lab, pred = lab[keep], pred[keep]
        if lab.size == 0:
            return self
        if lab.min() < 0 or lab.max() >= self.num_classes:
            raise ValueError(f"label {int(lab.max())} outside "
                             f"[0, {self.num_classes})")
        if pred.min() < 0 or pred.max() >= self.num_classes:
            raise ValueError(f"prediction {int(pred.max())} outside "
                             f"[0, {self.num_classes})")
        flat = lab * self.num_classes + pred
        counts = np.bincount(flat, minlength=self.num_classes ** 2)
        self.matrix += counts.reshape(self.num_classes, self.num_classes)
        return self

    def merge(self, other):
        if other.num_classes != self.num_classes:
            raise ValueError("class counts differ")
        self.matrix += other.matrix
        return self


@dataclass
class Metrics:
    pix_acc: float
    per_class_iou: np.ndarray  # NaN where the class is absent
    mean_iou: float
    confusion: np.ndarray

    def formatted(self):
        """Percent string in the conventional 'pixAcc / mIoU' style."""
        return f"{self.pix_acc * 100:.1f} / {self.mean_iou * 100:.1f}"


def compute_metrics(confusion):
    mat = confusion.matrix if isinstance(confusion, ConfusionMatrix) \
        else np.asarray(confusion)
    total = mat.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(mat).astype(np.float64)
    gt = mat.sum(axis=1).astype(np.float64)
    pred = mat.sum(axis=0).astype(np.float64)
    present = (gt + pred) > 0
    union = gt + pred - tp
    iou = np.full(mat.shape[0], np.nan)
    iou[present] = tp[present] / union[present]
    return Metrics(pix_acc=float(tp.sum() / total),
                   per_class_iou=iou,
                   mean_iou=float(np.nanmean(iou)) if present.any() else 0.0,
                   confusion=mat.copy())
