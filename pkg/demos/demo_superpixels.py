"""Oversegment a rendered scene and look at what the regions latch onto.

Run from the repository root:  python3 demos/demo_superpixels.py
Writes demos/out/superpixel_overlay.png.
"""

import os

import numpy as np
from PIL import Image

from anglseg.brdf import default_materials
from anglseg.imgio import gray_to_image
from anglseg.scene import random_scene_spec, render_stack
from anglseg.slic import SlicConfig, auto_superpixel_count, slic_segment

spec = random_scene_spec(96, 128, num_classes=6, num_views=4, seed=11,
                         noise_sigma=0.01)
stack = render_stack(spec, default_materials(6))
mean = stack.mean_image()
print(f"rendered a {spec.height}x{spec.width} scene, "
      f"{len(np.unique(stack.labels))} classes present")

target = auto_superpixel_count(spec.height, spec.width)
sp = slic_segment(mean, SlicConfig())
print(f"auto target {target} superpixels, got {sp.count} "
      f"(the count is kept within 20% of the target)")

# the iteration trace: max centroid movement per pass, which should shrink
tail = ", ".join(f"{s:.3f}" for s in sp.center_shifts[-4:])
print(f"centroid shift per iteration, last four: {tail}")

# how well do regions respect material boundaries?  compare the intensity
# spread inside superpixels with the spread of the whole image
global_std = mean.std()
within = [mean[ys, xs].std() for ys, xs in sp.members if len(ys) > 1]
print(f"intensity std: whole image {global_std:.3f}, "
      f"mean within a superpixel {np.mean(within):.3f}")

sizes = np.array([len(ys) for ys, _ in sp.members])
print(f"region sizes: min {sizes.min()}, median {int(np.median(sizes))}, "
      f"max {sizes.max()}")

# paint region boundaries over the mean image
ids = sp.ids
edge = np.zeros(ids.shape, dtype=bool)
edge[1:, :] |= ids[1:, :] != ids[:-1, :]
edge[:, 1:] |= ids[:, 1:] != ids[:, :-1]
rgb = np.asarray(gray_to_image(mean)).copy()
rgb[edge] = (255, 80, 80)

os.makedirs("demos/out", exist_ok=True)
Image.fromarray(rgb).save("demos/out/superpixel_overlay.png")
print("wrote demos/out/superpixel_overlay.png")
