"""Self-describing binary array files used to pass data between stages.

Layout (all multi-byte integers little-endian):

    magic   4 bytes  b"UQSG"
    version u16      1
    dtype   u8       0 = float32, 1 = uint8, 2 = int32
    rank    u8
    dims    rank * u32
    payload row-major array bytes

Write followed by read reproduces shape, dtype, and payload bit-exactly.
Also includes a binary PGM (P5) writer for 8-bit map visualization.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArrayFormatError,
    BadMagicError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
)

MAGIC = b"UQSG"
FORMAT_VERSION = 1

_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("u1"), 2: np.dtype("<i4")}
_DTYPE_TO_CODE = {np.dtype("float32"): 0, np.dtype("uint8"): 1, np.dtype("int32"): 2}

_HEAD = struct.Struct("<4sHBB")


@dataclass(frozen=True)
class ArrayFileHeader:
    version: int
    dtype: np.dtype
    shape: tuple


def write_array(path, array):
    """Write an array to ``path``. Dtype must be float32, uint8, or int32."""
    arr = np.ascontiguousarray(array)
    code = _DTYPE_TO_CODE.get(arr.dtype)
    if code is None:
        raise UnsupportedDtypeError(
            f"dtype {arr.dtype} not supported; use float32, uint8, or int32"
        )
    if arr.ndim == 0 or arr.ndim > 255:
        raise ArrayFormatError(f"rank {arr.ndim} outside supported range 1..255")
    header = _HEAD.pack(MAGIC, FORMAT_VERSION, code, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    payload = arr.astype(_CODE_TO_DTYPE[code], copy=False).tobytes(order="C")
    with open(path, "wb") as f:
        f.write(header)
        f.write(dims)
        f.write(payload)


def read_header(path):
    """Read and validate only the header of an array file."""
    with open(path, "rb") as f:
        return _read_header(f, path)


def read_array(path):
    """Read an array written by write_array; bit-exact round trip."""
    with open(path, "rb") as f:
        header = _read_header(f, path)
        count = int(np.prod(header.shape, dtype=np.int64))
        nbytes = count * header.dtype.itemsize
        payload = f.read(nbytes)
        if len(payload) < nbytes:
            raise TruncatedPayloadError(
                f"{path}: payload truncated, expected {nbytes} bytes, got {len(payload)}"
            )
        if f.read(1):
            raise ArrayFormatError(f"{path}: trailing bytes after payload")
    arr = np.frombuffer(payload, dtype=header.dtype).reshape(header.shape)
    # native byte order, writable copy
    return arr.astype(header.dtype.newbyteorder("="), copy=True)


def _read_header(f, path):
    raw = f.read(_HEAD.size)
    if len(raw) < _HEAD.size:
        raise TruncatedPayloadError(f"{path}: file shorter than the fixed header")
    magic, version, dtype_code, rank = _HEAD.unpack(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ArrayFormatError(
            f"{path}: unsupported format version {version}, expected {FORMAT_VERSION}"
        )
    dtype = _CODE_TO_DTYPE.get(dtype_code)
    if dtype is None:
        raise UnsupportedDtypeError(f"{path}: unknown dtype code {dtype_code}")
    if rank == 0:
        raise ArrayFormatError(f"{path}: rank 0 is not supported")
    dims_raw = f.read(4 * rank)
    if len(dims_raw) < 4 * rank:
        raise TruncatedPayloadError(f"{path}: file ends inside the dimension list")
    shape = struct.unpack(f"<{rank}I", dims_raw)
    return ArrayFileHeader(version=version, dtype=dtype, shape=tuple(shape))


def write_pgm(path, gray):
    """Write a 2D uint8 array as a binary PGM (P5) image."""
    img = np.asarray(gray)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ArrayFormatError(
            f"PGM writer needs a 2D uint8 array, got {img.shape} {img.dtype}"
        )
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(np.ascontiguousarray(img).tobytes())


def entropy_to_gray(entropy_map, class_count):
    """Scale an entropy map in bits to uint8 [0, 255] by its log2(c) ceiling."""
    h = np.asarray(entropy_map, dtype=np.float64)
    ceiling = float(np.log2(class_count))
    scaled = np.clip(np.rint(h / ceiling * 255.0), 0, 255)
    return scaled.astype(np.uint8)
