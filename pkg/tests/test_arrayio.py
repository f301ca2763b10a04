import struct

import numpy as np
import pytest

from uqseg.arrayio import (
    ArrayFileHeader,
    entropy_to_gray,
    read_array,
    read_header,
    write_array,
    write_pgm,
)
from uqseg.errors import (
    ArrayFormatError,
    BadMagicError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
)


@pytest.mark.parametrize(
    "array",
    [
        np.random.default_rng(0).random((4, 8, 8)).astype(np.float32),
        np.arange(24, dtype=np.uint8).reshape(2, 3, 4),
        (np.arange(12, dtype=np.int32) - 6).reshape(3, 4),
        np.array([1.5], dtype=np.float32),
    ],
)
def test_round_trip_bit_exact(tmp_path, array):
    path = tmp_path / "a.uqsg"
    write_array(path, array)
    back = read_array(path)
    assert back.dtype == array.dtype
    assert back.shape == array.shape
    assert back.tobytes() == array.tobytes()


def test_round_trip_preserves_float_bit_patterns(tmp_path):
    # exact payload bytes survive, including values that compare unequal
    raw = np.array([np.nan, -0.0, np.inf], dtype=np.float32)
    path = tmp_path / "bits.uqsg"
    write_array(path, raw)
    assert read_array(path).tobytes() == raw.tobytes()


def test_header_contents(tmp_path):
    path = tmp_path / "h.uqsg"
    write_array(path, np.zeros((5, 6), dtype=np.int32))
    header = read_header(path)
    assert header == ArrayFileHeader(version=1, dtype=np.dtype("<i4"), shape=(5, 6))


def test_wrong_magic(tmp_path):
    path = tmp_path / "bad.uqsg"
    path.write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(BadMagicError):
        read_array(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "short.uqsg"
    path.write_bytes(b"UQ")
    with pytest.raises(TruncatedPayloadError):
        read_array(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "t.uqsg"
    write_array(path, np.ones((4, 4), dtype=np.float32))
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(TruncatedPayloadError):
        read_array(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "long.uqsg"
    write_array(path, np.ones(3, dtype=np.uint8))
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(ArrayFormatError):
        read_array(path)


def test_unsupported_dtype_on_write(tmp_path):
    with pytest.raises(UnsupportedDtypeError):
        write_array(tmp_path / "f64.uqsg", np.zeros(3))


def test_unknown_dtype_code_on_read(tmp_path):
    path = tmp_path / "code.uqsg"
    header = struct.pack("<4sHBB", b"UQSG", 1, 9, 1) + struct.pack("<I", 1)
    path.write_bytes(header + b"\x00")
    with pytest.raises(UnsupportedDtypeError):
        read_array(path)


def test_unsupported_version(tmp_path):
    path = tmp_path / "v2.uqsg"
    header = struct.pack("<4sHBB", b"UQSG", 2, 1, 1) + struct.pack("<I", 1)
    path.write_bytes(header + b"\x00")
    with pytest.raises(ArrayFormatError):
        read_array(path)


def test_little_endian_layout(tmp_path):
    path = tmp_path / "le.uqsg"
    write_array(path, np.array([[7]], dtype=np.int32))
    data = path.read_bytes()
    assert data[:4] == b"UQSG"
    version, dtype_code, rank = struct.unpack("<HBB", data[4:8])
    assert (version, dtype_code, rank) == (1, 2, 2)
    assert struct.unpack("<2I", data[8:16]) == (1, 1)
    assert struct.unpack("<i", data[16:20]) == (7,)


def test_pgm_writer(tmp_path):
    img = np.arange(6, dtype=np.uint8).reshape(2, 3)
    path = tmp_path / "m.pgm"
    write_pgm(path, img)
    data = path.read_bytes()
    assert data.startswith(b"P5\n3 2\n255\n")
    assert data[-6:] == img.tobytes()
    with pytest.raises(ArrayFormatError):
        write_pgm(tmp_path / "bad.pgm", img.astype(np.int32))


def test_entropy_to_gray_scaling():
    h = np.array([[0.0, 1.0], [2.0, 2.0]])
    gray = entropy_to_gray(h, class_count=4)  # ceiling log2(4) = 2 bits
    np.testing.assert_array_equal(gray, [[0, 128], [255, 255]])
