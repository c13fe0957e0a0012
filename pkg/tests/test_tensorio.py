import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from pdeforge import tensorio


@settings(max_examples=60, deadline=None)
@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=4, max_side=6),
                  elements=st.floats(allow_nan=True, allow_infinity=True)))
def test_roundtrip_is_bit_exact(arr):
    back = tensorio.from_bytes(tensorio.to_bytes(arr))
    assert back.shape == arr.shape
    assert back.tobytes() == np.ascontiguousarray(arr).tobytes()


def test_header_layout():
    blob = tensorio.to_bytes(np.zeros((2, 3)))
    assert blob[:4] == b"PDET"
    assert len(blob) == 7 + 2 * 8 + 6 * 8


def test_bad_magic():
    blob = bytearray(tensorio.to_bytes(np.ones(3)))
    blob[:4] = b"NOPE"
    with pytest.raises(tensorio.BadMagicError):
        tensorio.from_bytes(bytes(blob))


@pytest.mark.parametrize("cut", [3, 9, 20, -1])
def test_truncated(cut):
    blob = tensorio.to_bytes(np.ones((2, 2)))
    with pytest.raises(tensorio.TruncatedPayloadError):
        tensorio.from_bytes(blob[:cut])


def test_unsupported_dtype_code():
    blob = bytearray(tensorio.to_bytes(np.ones(2)))
    blob[5] = 7
    with pytest.raises(tensorio.UnsupportedDtypeError):
        tensorio.from_bytes(bytes(blob))


def test_store_load(tmp_path):
    arr = np.arange(24.0).reshape(2, 3, 4)
    tensorio.store(arr, tmp_path / "a.pdet")
    np.testing.assert_array_equal(tensorio.load(tmp_path / "a.pdet"), arr)
    assert not list(tmp_path.glob("*.tmp"))
