"""SLIC superpixels on a single-channel reference image.

Local k-means in (intensity, spatial) space with grid-seeded centers,
followed by a connectivity pass that absorbs small fragments into their
nearest neighboring region.  The reference image is typically the per-pixel
mean over valid views of an intensity stack.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

# paper-density target: 2000 superpixels on a 500x500 tile
REFERENCE_COUNT = 2000
REFERENCE_AREA = 500 * 500


def auto_superpixel_count(height, width):
    return max(1, int(round(REFERENCE_COUNT * height * width / REFERENCE_AREA)))


@dataclass(frozen=True)
class SlicConfig:
    num_superpixels: int = 0  # 0 = auto from image area
    compactness: float = 10.0
    iterations: int = 10
    min_region_frac: float = 0.25

    def __post_init__(self):
        if self.num_superpixels < 0:
            raise ValueError("superpixel target must be >= 0")
        if self.compactness <= 0:
            raise ValueError("compactness must be positive")
        if self.iterations < 1:
            raise ValueError("need at least one iteration")
        if not 0.0 <= self.min_region_frac < 1.0:
            raise ValueError("min_region_frac must lie in [0, 1)")


@dataclass
class SuperpixelMap:
    ids: np.ndarray
    members: list
    centroids: np.ndarray
    center_shifts: list

    @property
    def count(self):
        return len(self.members)


def _scaled_intensity(reference):
    """Min-max scale to [0, 255]; constant images become all-zero."""
    lo, hi = float(reference.min()), float(reference.max())
    if hi - lo < 1e-12:
        return np.zeros_like(reference, dtype=np.float64)
    return (reference.astype(np.float64) - lo) / (hi - lo) * 255.0


def _grid_centers(height, width, target):
    spacing = math.sqrt(height * width / target)
    n_rows = max(1, int(round(height / spacing)))
    n_cols = max(1, int(round(width / spacing)))
    # pixel centers sit at integer coordinates, so the image spans
    # [-0.5, H-0.5]; even spacing inside that span avoids midpoint ties
    ys = (np.arange(n_rows) + 0.5) * height / n_rows - 0.5
    xs = (np.arange(n_cols) + 0.5) * width / n_cols - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([yy.ravel(), xx.ravel()], axis=1), spacing


def slic_segment(reference, config=SlicConfig()):
    """Partition a reference image into superpixels.

    Returns a SuperpixelMap whose ids are dense (0..count-1, first-seen in
    raster order) and whose regions are 4-connected.
    """
    ref = np.asarray(reference, dtype=np.float64)
    if ref.ndim != 2 or ref.size == 0:
        raise ValueError(f"reference must be a nonempty 2-d image, "
                         f"got shape {ref.shape}")
    height, width = ref.shape
    target = config.num_superpixels or auto_superpixel_count(height, width)
    if target > height * width:
        raise ValueError(f"target {target} exceeds pixel count "
                         f"{height * width}")

    intensity = _scaled_intensity(ref)
    centers_yx, spacing = _grid_centers(height, width, target)
    iy = np.clip(np.round(centers_yx[:, 0]).astype(int), 0, height - 1)
    ix = np.clip(np.round(centers_yx[:, 1]).astype(int), 0, width - 1)
    centers = np.column_stack([centers_yx, intensity[iy, ix]])

    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    spatial_w = (config.compactness / spacing) ** 2
    win = max(1, int(math.ceil(spacing)))
    shifts = []

    for _ in range(config.iterations):
        best = np.full((height, width), np.inf)
        labels = np.zeros((height, width), dtype=np.int32)
        for k in range(len(centers)):
            cy, cx, ci = centers[k]
            y0, y1 = max(0, int(cy) - win), min(height, int(cy) + win + 1)
            x0, x1 = max(0, int(cx) - win), min(width, int(cx) + win + 1)
            d2 = (intensity[y0:y1, x0:x1] - ci) ** 2 + spatial_w * (
                (yy[y0:y1, x0:x1] - cy) ** 2 + (xx[y0:y1, x0:x1] - cx) ** 2)
            patch_best = best[y0:y1, x0:x1]
            better = d2 < patch_best
            patch_best[better] = d2[better]
            labels[y0:y1, x0:x1][better] = k
        flat = labels.ravel()
        counts = np.bincount(flat, minlength=len(centers)).astype(np.float64)
        sums_y = np.bincount(flat, weights=yy.ravel(), minlength=len(centers))
        sums_x = np.bincount(flat, weights=xx.ravel(), minlength=len(centers))
        sums_i = np.bincount(flat, weights=intensity.ravel(),
                             minlength=len(centers))
        nonempty = counts > 0
        new_centers = centers.copy()
        new_centers[nonempty, 0] = sums_y[nonempty] / counts[nonempty]
        new_centers[nonempty, 1] = sums_x[nonempty] / counts[nonempty]
        new_centers[nonempty, 2] = sums_i[nonempty] / counts[nonempty]
        move = np.sqrt(((new_centers[:, :2] - centers[:, :2]) ** 2).sum(1))
        shifts.append(float(move.max()) if len(move) else 0.0)
        centers = new_centers

    labels = _enforce_connectivity(labels, centers, config, target)
    labels = _cap_region_count(labels, target)
    return _finalize(labels, ref, shifts)


def _absorb_into_neighbor(out, ys, xs):
    """Reassign the pixels to the touching region with the nearest centroid."""
    height, width = out.shape
    own = int(out[ys[0], xs[0]])
    neighbors = set()
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ny = np.clip(ys + dy, 0, height - 1)
        nx = np.clip(xs + dx, 0, width - 1)
        neighbors.update(np.unique(out[ny, nx]).tolist())
    neighbors.discard(own)
    if not neighbors:
        return False
    fy, fx = ys.mean(), xs.mean()
    best_id, best_d = -1, np.inf
    for nid in sorted(neighbors):
        nys, nxs = np.nonzero(out == nid)
        d = (nys.mean() - fy) ** 2 + (nxs.mean() - fx) ** 2
        if d < best_d:
            best_id, best_d = nid, d
    out[ys, xs] = best_id
    return True


def _cap_region_count(labels, target):
    """Merge smallest regions until the count is within +20% of target.

    Connectivity splitting only ever raises the region count, so this is
    the half of the band that needs active enforcement; merging two
    touching 4-connected regions keeps the union connected.
    """
    max_count = max(1, int(math.floor(1.2 * target)))
    while True:
        ids, counts = np.unique(labels, return_counts=True)
        if len(ids) <= max_count:
            return labels
        smallest = ids[np.argmin(counts)]
        ys, xs = np.nonzero(labels == smallest)
        if not _absorb_into_neighbor(labels, ys, xs):
            return labels


def _enforce_connectivity(labels, centers, config, target):
    """Split disconnected regions; absorb small fragments, keep big ones."""
    height, width = labels.shape
    min_size = config.min_region_frac * height * width / target
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    out = labels.copy()
    next_id = len(centers)
    fragments = []

    bboxes = ndimage.find_objects(labels + 1)
    for k, box in enumerate(bboxes):
        if box is None:
            continue
        mask = labels[box] == k
        comp, n = ndimage.label(mask, structure=structure)
        if n <= 1:
            continue
        sizes = np.bincount(comp.ravel())[1:]
        keep = int(np.argmax(sizes)) + 1
        for c in range(1, n + 1):
            if c == keep:
                continue
            ys, xs = np.nonzero(comp == c)
            ys = ys + box[0].start
            xs = xs + box[1].start
            if len(ys) >= min_size:
                out[ys, xs] = next_id
                next_id += 1
            else:
                fragments.append((len(ys), ys, xs))

    # absorb leftovers smallest-first into the touching region whose
    # centroid is closest to the fragment's own
    fragments.sort(key=lambda f: f[0])
    for _, ys, xs in fragments:
        _absorb_into_neighbor(out, ys, xs)
    return out


def _finalize(labels, reference, shifts):
    """Dense ids in raster first-seen order plus members and centroids."""
    flat = labels.ravel()
    _, first_pos, inverse = np.unique(flat, return_index=True,
                                      return_inverse=True)
    order = np.argsort(np.argsort(first_pos))
    dense = order[inverse].reshape(labels.shape).astype(np.int32)

    count = int(dense.max()) + 1
    height, width = labels.shape
    yy, xx = np.mgrid[0:height, 0:width]
    members = []
    centroids = np.zeros((count, 3))
    flat_dense = dense.ravel()
    order_idx = np.argsort(flat_dense, kind="stable")
    bounds = np.searchsorted(flat_dense[order_idx], np.arange(count + 1))
    for k in range(count):
        idx = order_idx[bounds[k]:bounds[k + 1]]
        ys, xs = np.unravel_index(idx, (height, width))
        members.append((ys, xs))
        centroids[k] = (ys.mean(), xs.mean(), reference[ys, xs].mean())
    return SuperpixelMap(ids=dense, members=members, centroids=centroids,
                         center_shifts=shifts)


def pool_over_superpixels(stack, spmap):
    """Per-superpixel multiset of valid samples across all views and pixels."""
    if stack.data.shape[1:] != spmap.ids.shape:
        raise ValueError(f"stack {stack.data.shape[1:]} and superpixel map "
                         f"{spmap.ids.shape} sizes differ")
    pools = []
    for ys, xs in spmap.members:
        vals = stack.data[:, ys, xs]
        ok = stack.valid[:, ys, xs]
        pools.append(vals[ok])
    return pools


def boundary_overlay(reference, ids):
    """RGB image with superpixel boundaries burned in red."""
    from .imgio import gray_to_image
    img = np.asarray(gray_to_image(reference)).copy()
    edge = np.zeros(ids.shape, dtype=bool)
    edge[:, 1:] |= ids[:, 1:] != ids[:, :-1]
    edge[1:, :] |= ids[1:, :] != ids[:-1, :]
    img[edge] = (255, 40, 40)
    return img
