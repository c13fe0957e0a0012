"""Binary tensor files.

Layout (all little-endian)::

    b"PDET"  | version u8 | dtype u8 | ndim u8 | dims u64 * ndim | payload

dtype 0 is float64. The payload is row-major.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"PDET"
VERSION = 1
DTYPE_FLOAT64 = 0

_HEADER = struct.Struct("<4sBBB")


class TensorFileError(ValueError):
    pass


class BadMagicError(TensorFileError):
    pass


class TruncatedPayloadError(TensorFileError):
    pass


class UnsupportedDtypeError(TensorFileError):
    pass


def to_bytes(array) -> bytes:
    arr = np.asarray(array, dtype="<f8")
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return _HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT64, arr.ndim) + dims + arr.tobytes(order="C")


def from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise TruncatedPayloadError(f"header needs {_HEADER.size} bytes, got {len(blob)}")
    magic, version, dtype, ndim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise TensorFileError(f"unsupported version {version}")
    if dtype != DTYPE_FLOAT64:
        raise UnsupportedDtypeError(f"unsupported dtype code {dtype}")
    offset = _HEADER.size
    if len(blob) < offset + 8 * ndim:
        raise TruncatedPayloadError("dims truncated")
    dims = struct.unpack_from(f"<{ndim}Q", blob, offset)
    offset += 8 * ndim
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    expected = offset + 8 * count
    if len(blob) != expected:
        raise TruncatedPayloadError(f"payload has {len(blob) - offset} bytes, expected {8 * count}")
    return np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(dims).astype(np.float64)


def store(array, path) -> None:
    blob = to_bytes(array)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def load(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
