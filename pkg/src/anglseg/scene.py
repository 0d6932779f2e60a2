"""Synthetic multiview scene generation.

A scene is a Voronoi patchwork of materials photographed from several view
directions under one distant light.  Rendering produces an aligned stack of
per-view intensity images plus a validity mask and the label map.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .brdf import Direction, _lobe_values

MIN_CELLS = 20
MAX_CELLS = 60


@dataclass
class SceneSpec:
    """Everything needed to render one scene deterministically.

    ambient adds a constant term to every sample before noise; invalid_frac
    is the approximate fraction of samples per view masked out as occluded.
    """
    height: int
    width: int
    num_views: int
    material_map: np.ndarray
    view_angles: list
    sun_angle: Direction
    light_intensity: float = math.pi
    noise_sigma: float = 0.0
    seed: int = 0
    ambient: float = 0.0
    invalid_frac: float = 0.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("scene dimensions must be positive")
        if self.num_views < 1:
            raise ValueError("need at least one view")
        if len(self.view_angles) != self.num_views:
            raise ValueError(f"{len(self.view_angles)} view angles for "
                             f"{self.num_views} views")
        self.material_map = np.ascontiguousarray(self.material_map, dtype=np.int32)
        if self.material_map.shape != (self.height, self.width):
            raise ValueError(f"material map shape {self.material_map.shape} "
                             f"does not match {self.height}x{self.width}")
        if self.material_map.min() < 0:
            raise ValueError("negative class id in material map")
        if self.light_intensity <= 0:
            raise ValueError("light intensity must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be nonnegative")
        if not 0.0 <= self.invalid_frac < 1.0:
            raise ValueError("invalid fraction must lie in [0, 1)")


@dataclass
class IntensityStack:
    """Aligned per-view luminance samples with ground truth.

    data is V x H x W, valid marks usable samples, labels is the H x W class
    map the stack was rendered from.
    """
    data: np.ndarray
    valid: np.ndarray
    labels: np.ndarray

    @property
    def num_views(self):
        return self.data.shape[0]

    def valid_counts(self):
        """Per-pixel count of valid views, H x W."""
        return self.valid.sum(axis=0)

    def mean_image(self):
        """Per-pixel mean over valid views; pixels with no valid view get 0."""
        counts = self.valid_counts()
        total = np.where(self.valid, self.data, 0.0).sum(axis=0)
        return np.where(counts > 0, total / np.maximum(counts, 1), 0.0)


def voronoi_material_map(height, width, num_classes, rng, min_cells=MIN_CELLS,
                         max_cells=MAX_CELLS):
    """Nearest-seed partition into 20-60 cells, each given a random class.

    Guaranteed to use at least two distinct classes when num_classes >= 2
    (cell classes are redrawn from the same stream until that holds).
    """
    if num_classes < 1:
        raise ValueError("need at least one material class")
    n_cells = int(rng.integers(min_cells, max_cells + 1))
    cy = rng.uniform(0, height, size=n_cells)
    cx = rng.uniform(0, width, size=n_cells)
    cell_class = rng.integers(0, num_classes, size=n_cells)
    while num_classes >= 2 and len(np.unique(cell_class)) < 2:
        cell_class = rng.integers(0, num_classes, size=n_cells)
    yy, xx = np.mgrid[0:height, 0:width]
    # n_cells distance planes at desk-scale images is small enough in one shot
    d2 = (yy[..., None] - cy) ** 2 + (xx[..., None] - cx) ** 2
    owner = np.argmin(d2, axis=-1)
    return cell_class[owner].astype(np.int32)


def random_view_angles(num_views, rng, theta_max=1.0):
    """num_views directions spread over the cap theta <= theta_max."""
    views = []
    for _ in range(num_views):
        theta = float(rng.uniform(0.05, theta_max))
        phi = float(rng.uniform(0.0, 2.0 * math.pi))
        views.append(Direction(theta, phi))
    return views


def random_scene_spec(height, width, num_classes, num_views, seed,
                      noise_sigma=0.0, invalid_frac=0.0, ambient=0.0,
                      light_intensity=math.pi):
    """Draw a full SceneSpec (layout, sun, views) from one seed."""
    rng = np.random.default_rng([int(seed), 0x5CE7E])
    mmap = voronoi_material_map(height, width, num_classes, rng)
    sun = Direction(float(rng.uniform(0.2, 0.9)),
                    float(rng.uniform(0.0, 2.0 * math.pi)))
    views = random_view_angles(num_views, rng)
    return SceneSpec(height=height, width=width, num_views=num_views,
                     material_map=mmap, view_angles=views, sun_angle=sun,
                     light_intensity=light_intensity, noise_sigma=noise_sigma,
                     seed=int(seed), ambient=ambient,
                     invalid_frac=invalid_frac)


def _occlusion_mask(height, width, frac, rng):
    """Rectangle blobs covering at least `frac` of the image."""
    mask = np.zeros((height, width), dtype=bool)
    target = frac * height * width
    while mask.sum() < target:
        bh = int(rng.integers(max(1, height // 8), max(2, height // 3)))
        bw = int(rng.integers(max(1, width // 8), max(2, width // 3)))
        y = int(rng.integers(0, height - bh + 1))
        x = int(rng.integers(0, width - bw + 1))
        mask[y:y + bh, x:x + bw] = True
    return mask


def render_stack(spec, brdf_table):
    """Render all views of a scene per its spec.

    Sample value: I_i * f(sun, view) * cos(sun theta) + ambient + noise,
    clamped at zero.  Per-class reflectance is constant within a view, so
    each view needs one BRDF evaluation per class present.
    """
    by_class = {m.class_id: m for m in brdf_table}
    present = np.unique(spec.material_map)
    for cid in present:
        if int(cid) not in by_class:
            raise KeyError(f"no BRDF model for class id {int(cid)}")

    cos_sun = math.cos(spec.sun_angle.theta)
    value = np.zeros((spec.num_views, spec.height, spec.width))
    for j, view in enumerate(spec.view_angles):
        shade = np.zeros(int(present.max()) + 1)
        for cid in present:
            f = float(_lobe_values(by_class[int(cid)], spec.sun_angle.theta,
                                   spec.sun_angle.phi, view.theta, view.phi))
            shade[int(cid)] = spec.light_intensity * f * cos_sun + spec.ambient
        value[j] = shade[spec.material_map]

    noise_rng = np.random.default_rng([spec.seed, 0x4015E])
    if spec.noise_sigma > 0:
        value = value + noise_rng.normal(0.0, spec.noise_sigma, size=value.shape)
    value = np.maximum(value, 0.0)

    valid = np.ones(value.shape, dtype=bool)
    if spec.invalid_frac > 0:
        mask_rng = np.random.default_rng([spec.seed, 0x0CC1D])
        for j in range(spec.num_views):
            valid[j] = ~_occlusion_mask(spec.height, spec.width,
                                        spec.invalid_frac, mask_rng)

    return IntensityStack(data=value, valid=valid,
                          labels=spec.material_map.copy())
