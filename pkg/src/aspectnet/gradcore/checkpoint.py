"""Flat binary checkpoint container.

Layout (all integers little-endian)::

    magic   4 bytes  b"AGCK"
    version u32
    count   u32
    per tensor:
        name_len u32, name (UTF-8)
        rank     u32
        extents  rank x u64
        values   prod(extents) x float64 (little-endian, C order)
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"AGCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, value in tensors.items():
        # np.ascontiguousarray would promote 0-d scalars to shape (1,)
        arr = np.array(value, dtype="<f8", order="C")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}Q", blob, pos)
            pos += 8 * rank
            size = int(np.prod(shape, dtype=np.int64))
            values = np.frombuffer(blob, dtype="<f8", count=size, offset=pos)
            pos += 8 * size
            out[name] = values.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    if pos != len(blob):
        raise CheckpointError("trailing bytes after last tensor")
    return out


def save(path, tensors: Mapping[str, np.ndarray]) -> str:
    """Write ``tensors`` to ``path``; returns the sha256 of the bytes written."""
    blob = dumps(tensors)
    Path(path).write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def load(path) -> dict[str, np.ndarray]:
    return loads(Path(path).read_bytes())


def digest(tensors: Mapping[str, np.ndarray]) -> str:
    return hashlib.sha256(dumps(tensors)).hexdigest()
