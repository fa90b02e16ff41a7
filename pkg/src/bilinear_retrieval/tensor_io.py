"""Bit-exact binary tensor files.

Layout: magic b"TNSR", version byte 0x01, dtype byte (0 = float64,
1 = float32), ndim byte, ndim little-endian uint64 extents, then the
row-major scalar data, little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"TNSR"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f8"): 0, np.dtype("<f4"): 1}
_CODE_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<f4")}


def write_tensor(path, arr) -> None:
    arr = np.asarray(arr)
    if arr.dtype == np.float64:
        arr = arr.astype("<f8", copy=False)
    elif arr.dtype == np.float32:
        arr = arr.astype("<f4", copy=False)
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}; use float64 or float32")
    if arr.ndim > 255:
        raise ValueError("too many dimensions")
    header = MAGIC + struct.pack("<BBB", VERSION, _DTYPE_CODES[arr.dtype], arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    Path(path).write_bytes(header + np.ascontiguousarray(arr).tobytes(order="C"))


def read_tensor(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic bytes")
    version, dtype_code, ndim = struct.unpack_from("<BBB", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if dtype_code not in _CODE_DTYPES:
        raise ValueError(f"{path}: unknown dtype code {dtype_code}")
    shape = struct.unpack_from(f"<{ndim}Q", raw, 7)
    dtype = _CODE_DTYPES[dtype_code]
    offset = 7 + 8 * ndim
    count = int(np.prod(shape)) if ndim else 1
    expected = offset + count * dtype.itemsize
    if len(raw) != expected:
        raise ValueError(f"{path}: truncated or oversized payload")
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)
    return data.reshape(shape).copy()
