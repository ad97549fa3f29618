"""PSTF binary tensor files.

Layout: magic ``PSTF``, version u32, dtype code u8 (0=f32, 1=f64), rank u8,
extents as u64, then the row-major payload; everything little-endian.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"PSTF"
VERSION = 1
_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class PstfError(ValueError):
    pass


def encode(array) -> bytes:
    arr = np.asarray(array)
    if arr.dtype not in _CODES:
        raise PstfError(f"unsupported dtype {arr.dtype}")
    code = _CODES[arr.dtype]
    header = MAGIC + struct.pack("<IBB", VERSION, code, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()


def decode(blob: bytes) -> np.ndarray:
    if blob[:4] != MAGIC:
        raise PstfError("bad magic")
    if len(blob) < 10:
        raise PstfError("truncated header")
    version, code, rank = struct.unpack_from("<IBB", blob, 4)
    if version != VERSION:
        raise PstfError(f"unsupported PSTF version {version}")
    if code not in _DTYPES:
        raise PstfError(f"unknown dtype code {code}")
    offset = 10 + 8 * rank
    if len(blob) < offset:
        raise PstfError("truncated extents")
    shape = struct.unpack_from(f"<{rank}Q", blob, 10)
    dtype = _DTYPES[code]
    count = int(np.prod(shape)) if rank else 1
    payload = blob[offset:]
    if len(payload) != count * dtype.itemsize:
        raise PstfError(f"payload has {len(payload)} bytes, expected {count * dtype.itemsize}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    return arr.astype(dtype.newbyteorder("="), copy=True)


def write_tensor(path, array) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(array))


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())


