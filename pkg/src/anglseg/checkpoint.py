"""Binary parameter checkpoints.

Layout: magic "ANGW", u32 format version, u32 tensor count, then per tensor
a u32 name length, the UTF-8 name, u32 rank, u32 dims, and the raw
little-endian float32 payload.  All header integers are little-endian.
"""

import struct

import numpy as np

MAGIC = b"ANGW"
VERSION = 1


class CheckpointError(IOError):
    pass


def save_checkpoint(path, tensors):
    """Write an ordered {name: float32 array} mapping."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name, array in tensors.items():
            arr = np.ascontiguousarray(array, dtype="<f4")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint back into {name: float32 array}, insertion order."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    def take(n):
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError(f"truncated checkpoint {path}")
        piece = blob[pos:pos + n]
        pos += n
        return piece

    pos = 0
    if take(4) != MAGIC:
        raise CheckpointError(f"{path} is not a parameter checkpoint "
                              f"(bad magic)")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version "
                              f"{version}")
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(dims)) if rank else 1
        payload = take(4 * size)
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims) \
            .astype(np.float32)
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return tensors
