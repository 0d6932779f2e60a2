"""Dataset assembly: scenes plus cached features become training samples.

One sample per (scene, view): the view's luminance image, the scene's dense
histogram map (shared across that scene's views), and the label map with
occluded pixels marked ignore.  Scenes are grouped so evaluation can fuse
across the views of each scene.
"""

from dataclasses import dataclass, field

import numpy as np

from .histogram import HistogramConfig, scene_histograms
from .metrics import IGNORE_INDEX
from .slic import SlicConfig, slic_segment


@dataclass
class SceneRecord:
    """All views of one scene, ready for the network."""
    name: str
    images: np.ndarray        # V x H x W float32
    dense: np.ndarray         # b x H x W float32, shared across views
    labels: np.ndarray        # H x W int32, original classes
    view_labels: np.ndarray   # V x H x W with occluded pixels ignored
    superpixel_ids: np.ndarray

    @property
    def num_views(self):
        return self.images.shape[0]


@dataclass
class ViewSample:
    image: np.ndarray
    dense: np.ndarray
    labels: np.ndarray


def record_from_stack(name, stack, slic_config=SlicConfig(),
                      hist_config=HistogramConfig(), feature=None):
    """Build a SceneRecord, computing superpixel histograms unless given."""
    if feature is None:
        spmap = slic_segment(stack.mean_image(), slic_config)
        feature = scene_histograms(stack, spmap, hist_config)
    dense = np.ascontiguousarray(
        feature.dense.transpose(2, 0, 1).astype(np.float32))
    view_labels = np.where(stack.valid, stack.labels[None, :, :],
                           IGNORE_INDEX).astype(np.int32)
    return SceneRecord(name=name,
                       images=stack.data.astype(np.float32),
                       dense=dense,
                       labels=stack.labels.astype(np.int32),
                       view_labels=view_labels,
                       superpixel_ids=np.asarray(feature.superpixel_ids),
                       )


def view_samples(records):
    """Flatten scene records into per-view samples in a fixed order."""
    out = []
    for rec in records:
        for j in range(rec.num_views):
            out.append(ViewSample(image=rec.images[j], dense=rec.dense,
                                  labels=rec.view_labels[j]))
    return out


def split_records(records, test_fraction, seed):
    """Deterministic scene-level split; at least one scene on each side."""
    if len(records) < 2:
        raise ValueError("need at least two scenes to split")
    rng = np.random.default_rng([int(seed), 0x5B117])
    order = rng.permutation(len(records))
    n_test = max(1, int(round(test_fraction * len(records))))
    n_test = min(n_test, len(records) - 1)
    test_idx = set(order[:n_test].tolist())
    train = [r for i, r in enumerate(records) if i not in test_idx]
    test = [r for i, r in enumerate(records) if i in test_idx]
    return train, test
