"""Flat binary checkpoint container.

Layout (all integers little-endian uint32, payload little-endian float32):

    version | entry count | name table (len-prefixed UTF-8, one per entry)
    | per entry: ndim, extents..., raw float32 data

Entries are written in sorted name order so identical states produce
identical bytes; round trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(state: dict[str, np.ndarray], path) -> None:
    names = sorted(state)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", FORMAT_VERSION, len(names)))
        for name in names:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
        for name in names:
            arr = np.ascontiguousarray(state[name], dtype="<f4")
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    off = 0

    def take(fmt):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise ValueError("truncated checkpoint")
        vals = struct.unpack_from(fmt, blob, off)
        off += size
        return vals

    version, count = take("<II")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    names = []
    for _ in range(count):
        (nlen,) = take("<I")
        names.append(blob[off:off + nlen].decode("utf-8"))
        off += nlen
    state = {}
    for name in names:
        (ndim,) = take("<I")
        shape = take(f"<{ndim}I")
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(shape)
        off += 4 * n
        state[name] = arr.copy()
    if off != len(blob):
        raise ValueError("trailing bytes in checkpoint")
    return state
