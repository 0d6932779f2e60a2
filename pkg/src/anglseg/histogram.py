"""Multi-scale angular luminance histograms over superpixels.

Each superpixel's valid samples across all views are binned twice: a coarse
block over the full intensity range and a fine block over the scene-wide
concentrated range, each L1-normalized, then concatenated.  The result can
be broadcast to a dense per-pixel feature map through the superpixel ids.
"""

from dataclasses import dataclass

import numpy as np

EPSILON_WIDTH = 1e-6


@dataclass(frozen=True)
class HistogramConfig:
    coarse_bins: int = 16
    fine_bins: int = 16
    coarse_lo: float = 0.0
    coarse_hi: float = 1.2
    q_low: float = 0.05
    q_high: float = 0.95

    def __post_init__(self):
        if self.coarse_bins < 1 or self.fine_bins < 1:
            raise ValueError("both scale blocks need at least one bin")
        if not self.coarse_hi > self.coarse_lo:
            raise ValueError("coarse range is empty")
        if not 0.0 <= self.q_low < self.q_high <= 1.0:
            raise ValueError("need 0 <= q_low < q_high <= 1")

    @property
    def total_bins(self):
        return self.coarse_bins + self.fine_bins


@dataclass
class AngularHistogramFeature:
    per_superpixel: np.ndarray
    superpixel_ids: np.ndarray
    coverage: np.ndarray
    empty_flags: np.ndarray

    @property
    def num_bins(self):
        return self.per_superpixel.shape[1]

    @property
    def dense(self):
        """H x W x b map: every pixel carries its superpixel's row."""
        return self.per_superpixel[self.superpixel_ids]


def concentrated_range(samples, config=HistogramConfig()):
    """Scene-wide (q_low, q_high) quantiles, widened if degenerate."""
    flat = np.asarray(samples, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ValueError("no valid samples to take quantiles of")
    lo = float(np.quantile(flat, config.q_low))
    hi = float(np.quantile(flat, config.q_high))
    if hi - lo < EPSILON_WIDTH:
        mid = 0.5 * (lo + hi)
        lo, hi = mid - EPSILON_WIDTH, mid + EPSILON_WIDTH
    return lo, hi


def _bin_block(samples, lo, hi, bins):
    """Unnormalized counts with out-of-range samples clamped to edge bins."""
    width = (hi - lo) / bins
    idx = np.floor((samples - lo) / width).astype(np.int64)
    idx = np.clip(idx, 0, bins - 1)
    return np.bincount(idx, minlength=bins).astype(np.float64)


def build_histograms(pools, superpixel_ids, fine_range,
                     config=HistogramConfig()):
    """Per-superpixel two-block histograms from pooled sample lists.

    Empty superpixels get uniform blocks and a raised flag rather than NaNs.
    """
    lo_f, hi_f = fine_range
    if not hi_f > lo_f:
        raise ValueError("fine range is empty")
    count = len(pools)
    rows = np.zeros((count, config.total_bins), dtype=np.float32)
    coverage = np.zeros(count, dtype=np.int64)
    flags = np.zeros(count, dtype=bool)
    for k, pool in enumerate(pools):
        samples = np.asarray(pool, dtype=np.float64).ravel()
        coverage[k] = samples.size
        if samples.size == 0:
            rows[k, :config.coarse_bins] = 1.0 / config.coarse_bins
            rows[k, config.coarse_bins:] = 1.0 / config.fine_bins
            flags[k] = True
            continue
        coarse = _bin_block(samples, config.coarse_lo, config.coarse_hi,
                            config.coarse_bins)
        fine = _bin_block(samples, lo_f, hi_f, config.fine_bins)
        rows[k, :config.coarse_bins] = coarse / coarse.sum()
        rows[k, config.coarse_bins:] = fine / fine.sum()
    ids = np.asarray(superpixel_ids)
    if ids.size and (ids.min() < 0 or ids.max() >= count):
        raise ValueError(f"superpixel id {int(ids.max())} out of range for "
                         f"{count} histograms")
    return AngularHistogramFeature(per_superpixel=rows,
                                   superpixel_ids=ids.astype(np.int64),
                                   coverage=coverage, empty_flags=flags)


def scene_histograms(stack, spmap, config=HistogramConfig()):
    """Pool a stack over its superpixels and histogram it in one call."""
    from .slic import pool_over_superpixels
    pools = pool_over_superpixels(stack, spmap)
    all_valid = stack.data[stack.valid]
    fine = concentrated_range(all_valid, config)
    return build_histograms(pools, spmap.ids, fine, config)


def nearest_candidate_classify(per_superpixel, references):
    """Class of the L1-nearest reference histogram; ties pick the lowest id."""
    rows = np.asarray(per_superpixel, dtype=np.float64)
    refs = np.asarray(references, dtype=np.float64)
    if rows.shape[1] != refs.shape[1]:
        raise ValueError(f"feature width {rows.shape[1]} != reference width "
                         f"{refs.shape[1]}")
    dists = np.abs(rows[:, None, :] - refs[None, :, :]).sum(axis=2)
    return np.argmin(dists, axis=1).astype(np.int64)


def class_reference_histograms(brdf_table, sun, views, fine_range,
                               config=HistogramConfig(), light_intensity=None,
                               samples_per_view=64, noise_sigma=0.0, seed=0):
    """Reference histogram per class from freshly rendered uniform patches.

    Renders a small single-class patch under the scene's own sun and view
    geometry, so references share the observation conditions of the scene
    being classified.
    """
    import math

    from .scene import SceneSpec, render_stack

    if light_intensity is None:
        light_intensity = math.pi
    side = max(1, int(round(math.sqrt(samples_per_view))))
    refs = []
    for model in brdf_table:
        spec = SceneSpec(
            height=side, width=side, num_views=len(views),
            material_map=np.full((side, side), model.class_id, dtype=np.int32),
            view_angles=list(views), sun_angle=sun,
            light_intensity=light_intensity, noise_sigma=noise_sigma,
            seed=int(seed) + model.class_id)
        patch = render_stack(spec, [model])
        pool = [patch.data[patch.valid]]
        ids = np.zeros((side, side), dtype=np.int64)
        feature = build_histograms(pool, ids, fine_range, config)
        refs.append(feature.per_superpixel[0])
    return np.stack(refs)
