"""Per-scene feature caches.

Layout: magic "AHIS", u32 version, u32 S (superpixels), b (histogram bins),
H, W, then S x b little-endian float32 histogram rows and H x W u32
superpixel ids.  A sidecar `<path>.meta` records the sha256 of the feature
configuration so stale caches are refused instead of silently reused.
"""

import hashlib
import os
import struct

import numpy as np

MAGIC = b"AHIS"
VERSION = 1


class FeatureCacheError(IOError):
    pass


def config_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_features(path, per_superpixel, superpixel_ids, cfg_hash):
    path = os.fspath(path)
    hist = np.ascontiguousarray(per_superpixel, dtype="<f4")
    ids = np.ascontiguousarray(superpixel_ids, dtype="<u4")
    if hist.ndim != 2:
        raise ValueError(f"histogram matrix must be 2-d, got {hist.shape}")
    if ids.ndim != 2:
        raise ValueError(f"id map must be 2-d, got {ids.shape}")
    s, b = hist.shape
    h, w = ids.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIII", VERSION, s, b, h, w))
        fh.write(hist.tobytes())
        fh.write(ids.tobytes())
    with open(path + ".meta", "w", encoding="utf-8") as fh:
        fh.write(f"sha256 = {cfg_hash}\n")


def load_features(path, expect_hash=None):
    """Returns (per_superpixel, superpixel_ids, stored_hash)."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FeatureCacheError(f"cannot read feature cache {path}: "
                                f"{exc}") from exc
    if blob[:4] != MAGIC:
        raise FeatureCacheError(f"{path} is not a feature cache (bad magic)")
    if len(blob) < 24:
        raise FeatureCacheError(f"truncated feature cache {path}")
    version, s, b, h, w = struct.unpack("<IIIII", blob[4:24])
    if version != VERSION:
        raise FeatureCacheError(f"{path}: unsupported cache version {version}")
    need = 24 + 4 * s * b + 4 * h * w
    if len(blob) != need:
        raise FeatureCacheError(f"{path}: expected {need} bytes, "
                                f"got {len(blob)}")
    hist = np.frombuffer(blob, dtype="<f4", count=s * b, offset=24) \
        .reshape(s, b).astype(np.float32)
    ids = np.frombuffer(blob, dtype="<u4", count=h * w, offset=24 + 4 * s * b) \
        .reshape(h, w).astype(np.int64)

    stored = None
    meta_path = path + ".meta"
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as fh:
            for line in fh:
                key, _, value = line.partition("=")
                if key.strip() == "sha256":
                    stored = value.strip()
    if expect_hash is not None and stored != expect_hash:
        raise FeatureCacheError(
            f"feature cache {path} was built with a different configuration "
            f"(hash {stored} != {expect_hash}); regenerate it")
    return hist, ids, stored
