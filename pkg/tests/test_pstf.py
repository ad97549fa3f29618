import struct

import numpy as np
import pytest

from panadapter.gradcore import read_tensor, write_tensor
from panadapter.gradcore.pstf import PstfError, decode, encode


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_round_trip_is_bit_exact(tmp_path, dtype):
    arr = np.random.default_rng(0).normal(size=(3, 4, 5)).astype(dtype)
    write_tensor(tmp_path / "t.pstf", arr)
    back = read_tensor(tmp_path / "t.pstf")
    assert back.dtype == dtype
    assert back.tobytes() == arr.tobytes()
    assert encode(back) == (tmp_path / "t.pstf").read_bytes()


def test_header_layout():
    blob = encode(np.zeros((2, 3), dtype=np.float64))
    assert blob[:4] == b"PSTF"
    version, code, rank = struct.unpack_from("<IBB", blob, 4)
    assert (version, code, rank) == (1, 1, 2)
    assert struct.unpack_from("<2Q", blob, 10) == (2, 3)
    assert len(blob) == 4 + 4 + 1 + 1 + 16 + 6 * 8


def test_bad_magic_and_truncation():
    blob = encode(np.ones(4, dtype=np.float32))
    with pytest.raises(PstfError):
        decode(b"XSTF" + blob[4:])
    with pytest.raises(PstfError):
        decode(blob[:-1])


def test_rejects_unsupported_dtype():
    with pytest.raises(PstfError):
        encode(np.ones(3, dtype=np.int32))
