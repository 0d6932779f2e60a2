"""Momentum-SGD training with polynomial learning-rate decay.

Deterministic under a fixed seed: batch order, crops and flips all come
from one seeded generator, and checkpoints are written every epoch.
"""

import csv
import math
import os

import numpy as np

from .checkpoint import save_checkpoint
from .config import TrainConfig
from .optim import SgdMomentum, poly_lr
from .tensor import Tensor


class TrainingDiverged(RuntimeError):
    pass


def _augment(rng, image, dense, labels, crop, flips=True):
    h, w = image.shape
    if crop < h or crop < w:
        y0 = int(rng.integers(0, h - crop + 1))
        x0 = int(rng.integers(0, w - crop + 1))
        image = image[y0:y0 + crop, x0:x0 + crop]
        labels = labels[y0:y0 + crop, x0:x0 + crop]
        if dense is not None:
            dense = dense[:, y0:y0 + crop, x0:x0 + crop]
    if not flips:
        return image, dense, labels
    if rng.random() < 0.5:
        image = image[:, ::-1]
        labels = labels[:, ::-1]
        if dense is not None:
            dense = dense[:, :, ::-1]
    if rng.random() < 0.5:
        image = image[::-1, :]
        labels = labels[::-1, :]
        if dense is not None:
            dense = dense[:, ::-1, :]
    return image, dense, labels


def _assemble(batch_samples, rng, crop, flips, use_dense):
    images, denses, labels = [], [], []
    for s in batch_samples:
        img, den, lab = s.image, s.dense if use_dense else None, s.labels
        if flips or crop < img.shape[0] or crop < img.shape[1]:
            img, den, lab = _augment(rng, img, den, lab, crop, flips)
        images.append(np.ascontiguousarray(img, dtype=np.float32))
        labels.append(np.ascontiguousarray(lab))
        if use_dense:
            denses.append(np.ascontiguousarray(den, dtype=np.float32))
    x = Tensor(np.stack(images)[:, None, :, :])
    d = Tensor(np.stack(denses)) if use_dense else None
    y = np.stack(labels)
    return x, d, y


def train_model(model, samples, tconf=TrainConfig(), seed=0, out_dir=None):
    """Run the full schedule; returns the per-epoch mean loss history.

    Writes checkpoint_epoch_###.angw and loss.csv under out_dir when given.
    """
    if not samples:
        raise ValueError("empty training set")
    if tconf.crop % 8:
        raise ValueError(f"crop {tconf.crop} must be a multiple of 8")
    crop = min(tconf.crop, samples[0].image.shape[0],
               samples[0].image.shape[1])
    use_dense = model.config.use_histogram

    rng = np.random.default_rng([int(seed), 0x72A17])
    opt = SgdMomentum(model.params(), lr=tconf.base_lr,
                      momentum=tconf.momentum,
                      weight_decay=tconf.weight_decay)
    batches_per_epoch = math.ceil(len(samples) / tconf.batch_size)
    total_iters = tconf.epochs * batches_per_epoch
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    history = []
    iteration = 0
    prev_grad_norm = 0.0
    for epoch in range(tconf.epochs):
        model.train()
        order = rng.permutation(len(samples))
        epoch_losses = []
        for b in range(batches_per_epoch):
            idx = order[b * tconf.batch_size:(b + 1) * tconf.batch_size]
            x, d, y = _assemble([samples[i] for i in idx], rng, crop,
                                tconf.flips, use_dense)
            lr = poly_lr(tconf.base_lr, iteration, total_iters,
                         tconf.poly_power)
            acts = model.forward(x, d)
            loss = model.loss(acts, y, alpha=tconf.alpha)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"loss became {value} at iteration {iteration} "
                    f"(lr {lr:.6f}, previous gradient norm "
                    f"{prev_grad_norm:.4g})")
            loss.backward()
            opt.lr = lr
            prev_grad_norm = max(
                float(np.linalg.norm(p.grad))
                for p in model.params().values() if p.grad is not None)
            opt.step()
            epoch_losses.append(value)
            iteration += 1
        history.append(float(np.mean(epoch_losses)))
        if out_dir:
            save_checkpoint(
                os.path.join(out_dir, f"checkpoint_epoch_{epoch + 1:03d}.angw"),
                model.state())
    if out_dir:
        with open(os.path.join(out_dir, "loss.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "mean_loss"])
            for e, v in enumerate(history, start=1):
                writer.writerow([e, repr(v)])
    return history
