"""Flat binary tensor files ("TNSR").

Layout, all little-endian regardless of host platform:

    bytes 0..3   magic b"TNSR"
    byte  4      format version, currently 1
    byte  5      dtype code, 1 = float32
    byte  6      number of dimensions (1..8)
    byte  7      reserved, must be 0
    next 4*ndim  dims as u32
    rest         row-major float32 payload

Round-trips are bit-exact: read_tnsr(write_tnsr(a)) returns exactly the
float32 bytes that went in.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    NonFiniteValue,
    ShapeError,
    TruncatedPayload,
    UnsupportedDtype,
    UnsupportedVersion,
)

MAGIC = b"TNSR"
VERSION = 1
DTYPE_FLOAT32 = 1
MAX_NDIM = 8

_HEADER = struct.Struct("<4sBBBB")


def write_tnsr(array: np.ndarray, path: str | Path) -> None:
    """Serialize `array` to `path` as float32. Values must be finite."""
    arr = np.asarray(array)
    if arr.ndim < 1 or arr.ndim > MAX_NDIM:
        raise ShapeError(f"ndim {arr.ndim} outside 1..{MAX_NDIM}")
    if arr.size and not np.isfinite(arr).all():
        raise NonFiniteValue(f"refusing to write non-finite values to {path}")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, arr.ndim, 0))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(payload.tobytes())


def read_tnsr(path: str | Path) -> np.ndarray:
    """Inverse of write_tnsr. Returns a fresh writable float32 array."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size or blob[:4] != MAGIC:
        raise BadMagic(f"{path}: not a TNSR file")
    _, version, dtype, ndim, _reserved = _HEADER.unpack_from(blob)
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: format version {version}")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtype(f"{path}: dtype code {dtype}")
    if ndim < 1 or ndim > MAX_NDIM:
        raise ShapeError(f"{path}: ndim {ndim} outside 1..{MAX_NDIM}")
    dims_end = _HEADER.size + 4 * ndim
    if len(blob) < dims_end:
        raise TruncatedPayload(f"{path}: header cut short")
    dims = struct.unpack_from(f"<{ndim}I", blob, _HEADER.size)
    n_values = math.prod(dims)
    expected = dims_end + 4 * n_values
    if len(blob) != expected:
        raise TruncatedPayload(
            f"{path}: expected {expected} bytes for shape {dims}, got {len(blob)}"
        )
    flat = np.frombuffer(blob, dtype="<f4", count=n_values, offset=dims_end)
    return flat.reshape(dims).copy()
