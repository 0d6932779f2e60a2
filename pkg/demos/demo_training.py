"""A miniature end-to-end run: render, featurize, train, evaluate, fuse.

Run from the repository root:  python3 demos/demo_training.py
Writes demos/out/prediction_panel.png.  Takes a few seconds on one core.
"""

import os

import numpy as np

from anglseg.ablation import benchmark_materials, make_benchmark
from anglseg.config import NetworkConfig, TrainConfig
from anglseg.data import split_records, view_samples
from anglseg.evaluate import (evaluate_fused, evaluate_per_view, fuse_views,
                              predict_logits)
from anglseg.imgio import (gray_to_image, labels_to_image, make_legend,
                           side_by_side)
from anglseg.model import MaterialSegNet
from anglseg.train import train_model

# a small scene set; make_benchmark renders, segments, and histograms it
records = make_benchmark(num_scenes=12, seed=4, height=48, width=48,
                         num_views=4, noise_sigma=0.02)
train, test = split_records(records, 0.25, seed=0)
print(f"{len(train)} training scenes, {len(test)} held out")

num_classes = len(benchmark_materials())
net_cfg = NetworkConfig(base_channels=8, pah_channels=8,
                        stack1_channels=16, stack2_channels=8)
model = MaterialSegNet(num_classes, histogram_bins=records[0].dense.shape[0],
                       config=net_cfg, seed=0)
n_params = sum(p.data.size for p in model.params().values())
print(f"network has {n_params} parameters "
      f"({records[0].dense.shape[0]} histogram bins per pixel)")

tconf = TrainConfig(epochs=20, batch_size=4, crop=48)
losses = train_model(model, view_samples(train), tconf, seed=0)
print("mean loss by epoch:",
      "  ".join(f"[{e + 1}] {losses[e]:.3f}"
                for e in (0, 4, 9, 14, len(losses) - 1)))

per_view = evaluate_per_view(model, test, num_classes)
fused = evaluate_fused(model, test, num_classes)
print("held out, every view scored alone:", per_view.formatted(),
      "(pixAcc / mIoU in percent)")
print("held out, views fused per scene:  ", fused.formatted())

# a picture of what the numbers mean: one test scene as
# input | truth | single-view prediction | fused prediction
rec = test[0]
logits = np.stack([predict_logits(model, rec.images[j], rec.dense)
                   for j in range(rec.num_views)])
legend = make_legend([m.name for m in benchmark_materials()])
panel = side_by_side([gray_to_image(rec.images[0]),
                      labels_to_image(rec.labels, legend),
                      labels_to_image(logits[0].argmax(axis=0), legend),
                      labels_to_image(fuse_views(logits=logits), legend)])
os.makedirs("demos/out", exist_ok=True)
panel.save("demos/out/prediction_panel.png")
print(f"wrote demos/out/prediction_panel.png for scene {rec.name} "
      "(input, truth, one view's prediction, fused)")
