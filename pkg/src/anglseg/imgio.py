"""Scene directory I/O.

Layout per scene: view_###.pgm (16-bit grayscale intensities), labels.png
(8-bit paletted class map), angles.csv (sun header row, then one row per
view), scene.toml (flat key = value metadata), and valid_###.pgm masks when
any samples are occluded.
"""

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .brdf import Direction
from .scene import IntensityStack

# float intensities are stored as u16 fractions of this scale value;
# it is recorded in scene.toml so readers never have to guess
VALUE_SCALE = 2.0

PALETTE_SEED = 0xC0109


class SceneIoError(IOError):
    pass


def write_pgm16(path, values, scale=VALUE_SCALE):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d image, got shape {arr.shape}")
    q = np.clip(np.round(arr / scale * 65535.0), 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{arr.shape[1]} {arr.shape[0]}\n65535\n".encode("ascii"))
        fh.write(q.tobytes())


def read_pgm16(path, scale=VALUE_SCALE):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise SceneIoError(f"cannot read {path}: {exc}") from exc
    try:
        # header = three whitespace-separated tokens, comments stripped
        tokens, pos = [], 0
        while len(tokens) < 4:
            while pos < len(blob) and blob[pos:pos + 1].isspace():
                pos += 1
            if blob[pos:pos + 1] == b"#":
                while pos < len(blob) and blob[pos:pos + 1] != b"\n":
                    pos += 1
                continue
            start = pos
            while pos < len(blob) and not blob[pos:pos + 1].isspace():
                pos += 1
            tokens.append(blob[start:pos])
        pos += 1
        if tokens[0] != b"P5":
            raise ValueError(f"not a P5 PGM (magic {tokens[0]!r})")
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        if maxval != 65535:
            raise ValueError(f"expected maxval 65535, got {maxval}")
        data = np.frombuffer(blob, dtype=">u2", offset=pos,
                             count=height * width)
        return data.reshape(height, width).astype(np.float64) / 65535.0 * scale
    except ValueError as exc:
        raise SceneIoError(f"corrupt PGM file {path}: {exc}") from exc


def write_mask_pgm(path, mask):
    m = np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii"))
        fh.write(m.tobytes())


def read_mask_pgm(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
        parts = blob.split(b"\n", 3)
        if parts[0] != b"P5" or parts[2] != b"255":
            raise ValueError("not an 8-bit P5 mask")
        width, height = (int(t) for t in parts[1].split())
        data = np.frombuffer(parts[3], dtype=np.uint8, count=height * width)
        return data.reshape(height, width) > 127
    except (ValueError, IndexError) as exc:
        raise SceneIoError(f"corrupt mask file {path}: {exc}") from exc


def color_palette(num_classes):
    """num_classes visually distinct RGB colors, stable across runs."""
    rng = np.random.default_rng(PALETTE_SEED)
    hues = (np.arange(num_classes) / num_classes + 0.13) % 1.0
    hues = hues[rng.permutation(num_classes)]
    colors = []
    for i, h in enumerate(hues):
        sat = 0.55 + 0.35 * ((i * 2) % 3) / 2.0
        val = 0.65 + 0.3 * (i % 2)
        colors.append(_hsv_to_rgb(h, sat, val))
    return np.array(colors, dtype=np.uint8)


def _hsv_to_rgb(h, s, v):
    i = int(h * 6.0) % 6
    f = h * 6.0 - int(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    r, g, b = [(v, t, p), (q, v, p), (p, v, t),
               (p, q, v), (t, p, v), (v, p, q)][i]
    return [int(round(255 * r)), int(round(255 * g)), int(round(255 * b))]


@dataclass(frozen=True)
class ColorLegend:
    colors: np.ndarray
    names: tuple

    def __post_init__(self):
        if len(self.colors) != len(self.names):
            raise ValueError("one color per class name")
        seen = {tuple(c) for c in self.colors}
        if len(seen) != len(self.colors):
            raise ValueError("legend colors must be distinct")


def make_legend(class_names):
    return ColorLegend(colors=color_palette(len(class_names)),
                       names=tuple(class_names))


def write_labels_png(path, labels, num_classes):
    lab = np.asarray(labels)
    if lab.max() >= num_classes:
        raise ValueError(f"label {int(lab.max())} >= num_classes {num_classes}")
    img = Image.fromarray(lab.astype(np.uint8), mode="P")
    pal = np.zeros((256, 3), dtype=np.uint8)
    pal[:num_classes] = color_palette(num_classes)
    img.putpalette(pal.reshape(-1).tolist())
    img.save(path, format="PNG")


def read_labels_png(path):
    try:
        with Image.open(path) as img:
            if img.mode != "P":
                raise ValueError(f"expected paletted PNG, got mode {img.mode}")
            return np.asarray(img, dtype=np.int32)
    except (OSError, ValueError) as exc:
        raise SceneIoError(f"corrupt label file {path}: {exc}") from exc


def labels_to_image(labels, legend):
    lab = np.asarray(labels)
    rgb = legend.colors[np.clip(lab, 0, len(legend.colors) - 1)]
    return Image.fromarray(rgb.astype(np.uint8), mode="RGB")


def write_color_png(path, labels, legend):
    labels_to_image(labels, legend).save(path, format="PNG")


def legend_strip(legend, swatch=24):
    """Horizontal strip of swatches for figure captions."""
    k = len(legend.names)
    strip = np.zeros((swatch, swatch * k, 3), dtype=np.uint8)
    for i, c in enumerate(legend.colors):
        strip[:, i * swatch:(i + 1) * swatch] = c
    return Image.fromarray(strip, mode="RGB")


def gray_to_image(values, scale=VALUE_SCALE):
    g = np.clip(np.asarray(values) / scale * 255.0, 0, 255).astype(np.uint8)
    return Image.fromarray(g, mode="L").convert("RGB")


def side_by_side(images, pad=4):
    """Panel of equally sized RGB images separated by white gutters."""
    arrays = [np.asarray(im.convert("RGB")) for im in images]
    h = max(a.shape[0] for a in arrays)
    total_w = sum(a.shape[1] for a in arrays) + pad * (len(arrays) - 1)
    panel = np.full((h, total_w, 3), 255, dtype=np.uint8)
    x = 0
    for a in arrays:
        panel[:a.shape[0], x:x + a.shape[1]] = a
        x += a.shape[1] + pad
    return Image.fromarray(panel, mode="RGB")


def write_angles_csv(path, sun, views, light_intensity):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sun", repr(sun.theta), repr(sun.phi),
                         repr(light_intensity)])
        for j, v in enumerate(views):
            writer.writerow([j, repr(v.theta), repr(v.phi)])


def read_angles_csv(path):
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0] != "sun":
            raise ValueError("missing sun header row")
        sun = Direction(float(rows[0][1]), float(rows[0][2]))
        intensity = float(rows[0][3])
        views = []
        for j, row in enumerate(rows[1:]):
            if int(row[0]) != j:
                raise ValueError(f"view rows out of order at {row[0]}")
            views.append(Direction(float(row[1]), float(row[2])))
        return sun, views, intensity
    except (OSError, ValueError, IndexError) as exc:
        raise SceneIoError(f"corrupt angles file {path}: {exc}") from exc


def _write_meta(path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in entries:
            fh.write(f"{key} = {value}\n")


def _read_meta(path):
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                entries[key.strip()] = value.strip()
        return entries
    except OSError as exc:
        raise SceneIoError(f"cannot read {path}: {exc}") from exc


def write_scene_dir(out_dir, spec, stack):
    """Write one rendered scene; returns the directory path."""
    os.makedirs(out_dir, exist_ok=True)
    for j in range(stack.num_views):
        write_pgm16(os.path.join(out_dir, f"view_{j:03d}.pgm"), stack.data[j])
    if not stack.valid.all():
        for j in range(stack.num_views):
            write_mask_pgm(os.path.join(out_dir, f"valid_{j:03d}.pgm"),
                           stack.valid[j])
    num_classes = int(stack.labels.max()) + 1
    write_labels_png(os.path.join(out_dir, "labels.png"), stack.labels,
                     max(num_classes, 1))
    write_angles_csv(os.path.join(out_dir, "angles.csv"), spec.sun_angle,
                     spec.view_angles, spec.light_intensity)
    _write_meta(os.path.join(out_dir, "scene.toml"), [
        ("seed", spec.seed),
        ("noise_sigma", repr(spec.noise_sigma)),
        ("num_classes", num_classes),
        ("num_views", stack.num_views),
        ("height", spec.height),
        ("width", spec.width),
        ("ambient", repr(spec.ambient)),
        ("invalid_frac", repr(spec.invalid_frac)),
        ("value_scale", repr(VALUE_SCALE)),
    ])
    return out_dir


def read_scene_dir(scene_dir):
    """Load a scene directory back into (stack, sun, views, meta)."""
    meta_path = os.path.join(scene_dir, "scene.toml")
    if not os.path.exists(meta_path):
        raise SceneIoError(f"not a scene directory (no scene.toml): {scene_dir}")
    meta = _read_meta(meta_path)
    scale = float(meta.get("value_scale", VALUE_SCALE))
    sun, views, intensity = read_angles_csv(os.path.join(scene_dir,
                                                         "angles.csv"))
    data, valid = [], []
    for j in range(len(views)):
        view_path = os.path.join(scene_dir, f"view_{j:03d}.pgm")
        if not os.path.exists(view_path):
            raise SceneIoError(f"missing view file {view_path}")
        data.append(read_pgm16(view_path, scale=scale))
        mask_path = os.path.join(scene_dir, f"valid_{j:03d}.pgm")
        if os.path.exists(mask_path):
            valid.append(read_mask_pgm(mask_path))
        else:
            valid.append(np.ones(data[-1].shape, dtype=bool))
    labels = read_labels_png(os.path.join(scene_dir, "labels.png"))
    stack = IntensityStack(data=np.stack(data), valid=np.stack(valid),
                           labels=labels)
    meta["light_intensity"] = repr(intensity)
    return stack, sun, views, meta


def list_scene_dirs(root):
    """Scene subdirectories of root, sorted by name."""
    out = []
    for name in sorted(os.listdir(root)):
        full = os.path.join(root, name)
        if os.path.isdir(full) and os.path.exists(os.path.join(full,
                                                               "scene.toml")):
            out.append(full)
    return out
