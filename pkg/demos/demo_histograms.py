"""Why angular histograms: twin materials that a mean image cannot split.

Run from the repository root:  python3 demos/demo_histograms.py
"""

import numpy as np

from anglseg.ablation import benchmark_materials
from anglseg.histogram import (HistogramConfig, class_reference_histograms,
                               concentrated_range, nearest_candidate_classify,
                               scene_histograms)
from anglseg.scene import random_scene_spec, render_stack
from anglseg.slic import SlicConfig, slic_segment

table = benchmark_materials()
spec = random_scene_spec(80, 80, num_classes=len(table), num_views=8,
                         seed=5, noise_sigma=0.01)
stack = render_stack(spec, table)

# the trap: the matte/gloss twins are tuned so their per-pixel means agree
mean = stack.mean_image()
print("per-class mean intensity and spread across the 8 views:")
for m in table:
    where = stack.labels == m.class_id
    samples = stack.data[:, where]
    print(f"  {m.name:<13} mean {samples.mean():.3f}  view std {samples.std():.3f}")
print("each twin pair shares a mean but not a spread, so any single image "
      "or average of images mixes them up")

# pool the stack over superpixels and build two-block histograms: a fixed
# coarse block plus a fine block over the concentrated middle of the data
cfg = HistogramConfig()
sp = slic_segment(mean, SlicConfig())
feature = scene_histograms(stack, sp, cfg)
print(f"\n{sp.count} superpixels, {feature.num_bins} bins each "
      f"({cfg.coarse_bins} coarse + {cfg.fine_bins} fine)")
coarse_sums = feature.per_superpixel[:, :cfg.coarse_bins].sum(axis=1)
fine_sums = feature.per_superpixel[:, cfg.coarse_bins:].sum(axis=1)
print("block sums (each block normalizes to 1 on its own):",
      np.unique(coarse_sums.round(6)), np.unique(fine_sums.round(6)))

# compare one twin pair's histograms directly
rows_by_class = {}
for k, (ys, xs) in enumerate(sp.members):
    votes = np.bincount(stack.labels[ys, xs], minlength=len(table))
    if votes.max() > 0.95 * len(ys):  # nearly pure region
        rows_by_class.setdefault(int(votes.argmax()), feature.per_superpixel[k])
for cid in (2, 3):
    fine_block = rows_by_class[cid][cfg.coarse_bins:]
    occupied = int((fine_block > 0.02).sum())
    print(f"  {table[cid].name}: {occupied} fine bins carry more than 2% "
          f"of the mass, peak weight {fine_block.max():.2f}")
print("the matte twin piles into a few bins, the glossy twin smears across "
      "more of them")

# classify every superpixel against per-class reference histograms rendered
# under the same sun and views
all_valid = stack.data[stack.valid]
fine = concentrated_range(all_valid, cfg)
refs = class_reference_histograms(table, spec.sun_angle, spec.view_angles,
                                  fine, cfg, noise_sigma=0.01)
pred = nearest_candidate_classify(feature.per_superpixel, refs)

truth = np.empty(sp.count, dtype=np.int64)
for k, (ys, xs) in enumerate(sp.members):
    truth[k] = np.bincount(stack.labels[ys, xs]).argmax()
acc = (pred == truth).mean()
print(f"\nnearest-reference classification: {acc:.1%} of superpixels correct")

# and the reason a mean threshold cannot replace this: across scenes the
# twins' per-scene means interleave, since sun and view geometry move the
# observed level more than the twins differ
per_scene = []
for s in range(8):
    sp2 = random_scene_spec(48, 48, num_classes=len(table), num_views=8,
                            seed=100 + s, noise_sigma=0.02)
    st2 = render_stack(sp2, table)
    row = []
    for cid in (0, 1):
        where = st2.labels == cid
        row.append(st2.data[:, where].mean() if where.any() else np.nan)
    per_scene.append(row)
per_scene = np.array(per_scene)
print("\nper-scene mean intensity over 8 fresh scenes:")
print("  matte-low:", "  ".join(f"{v:.3f}" for v in per_scene[:, 0]))
print("  gloss-low:", "  ".join(f"{v:.3f}" for v in per_scene[:, 1]))
lo = np.nanmin(per_scene, axis=0)
hi = np.nanmax(per_scene, axis=0)
overlap = min(hi[0], hi[1]) - max(lo[0], lo[1])
print(f"the two ranges overlap by {overlap:.3f}, so no fixed intensity "
      f"threshold separates them; the angular spread does")
