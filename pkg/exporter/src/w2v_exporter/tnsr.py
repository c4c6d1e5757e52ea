"""Binary tensor file format shared with the classifier package.

Layout, little-endian throughout: magic "TNSR", version byte (1), dtype
byte (1 = float32), ndim byte, one reserved zero byte, ndim u32 dims, then
the row-major float32 payload. This is an independent implementation of
the shared on-disk contract; the consumer package has its own.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

_MAGIC = b"TNSR"
_VERSION = 1
_DTYPE_F32 = 1
_HEADER = struct.Struct("<4sBBBB")


def write_tnsr(values: np.ndarray, path: str | Path) -> None:
    arr = np.ascontiguousarray(values, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ValueError(f"{path}: refusing to write non-finite values")
    header = _HEADER.pack(_MAGIC, _VERSION, _DTYPE_F32, arr.ndim, 0)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + dims + arr.tobytes())


def read_tnsr(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, dtype, ndim, _ = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _VERSION or dtype != _DTYPE_F32:
        raise ValueError(f"{path}: unsupported version/dtype {version}/{dtype}")
    dims_end = _HEADER.size + 4 * ndim
    dims = struct.unpack_from(f"<{ndim}I", blob, _HEADER.size)
    expected = dims_end + 4 * int(np.prod(dims, dtype=np.int64))
    if len(blob) != expected:
        raise ValueError(f"{path}: payload is {len(blob)} bytes, expected {expected}")
    return np.frombuffer(blob[dims_end:], dtype="<f4").reshape(dims).copy()
