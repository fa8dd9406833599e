import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landkit.raster import (
    IMAGERY_BANDS,
    RasterFormatError,
    RasterStack,
    RasterValidationError,
    Sample,
    read_raster,
    validate,
    write_raster,
)


def roundtrip(r: RasterStack) -> RasterStack:
    buf = io.BytesIO()
    write_raster(r, buf)
    buf.seek(0)
    return read_raster(buf)


def test_single_cell_roundtrip_and_byte_count():
    r = RasterStack.from_array(["a"], np.zeros((1, 1, 1)), cell_size_m=43.0)
    buf = io.BytesIO()
    n = write_raster(r, buf)
    # 24-byte header + 1-byte name blob + 4 payload bytes
    assert n == 24 + 1 + 4
    assert n == len(buf.getvalue())
    buf.seek(0)
    back = read_raster(buf)
    assert back.values.tolist() == [0.0]
    assert back.channel_names == ("a",)


def test_imagery_roundtrip_bitwise():
    vals = np.arange(16, dtype=np.float32).reshape(4, 2, 2) / 7.3
    r = RasterStack.from_array(IMAGERY_BANDS, vals, cell_size_m=43.0)
    back = roundtrip(r)
    assert np.array_equal(back.values, r.values)
    assert back.channel_names == r.channel_names
    assert back.cell_size_m == r.cell_size_m
    assert (back.width, back.height) == (r.width, r.height)


def test_serialization_is_platform_fixed():
    r = RasterStack.from_array(["z"], np.array([[[1.5]]]), cell_size_m=2.0)
    buf = io.BytesIO()
    write_raster(r, buf)
    expected = (
        b"LSCP"
        + struct.pack("<HHIIfI", 1, 1, 1, 1, 2.0, 1)
        + b"z"
        + struct.pack("<f", 1.5)
    )
    assert buf.getvalue() == expected


def test_write_rejects_nan():
    r = RasterStack.from_array(["a"], np.array([[[np.nan]]]))
    with pytest.raises(RasterValidationError):
        write_raster(r, io.BytesIO())


def test_read_rejects_bad_magic():
    with pytest.raises(RasterFormatError):
        read_raster(io.BytesIO(b"XXXX" + b"\x00" * 40))


def test_read_rejects_unsupported_version():
    r = RasterStack.from_array(["a"], np.zeros((1, 1, 1)))
    buf = io.BytesIO()
    write_raster(r, buf)
    raw = bytearray(buf.getvalue())
    raw[4] = 99
    with pytest.raises(RasterFormatError):
        read_raster(io.BytesIO(bytes(raw)))


def test_read_rejects_truncated_payload():
    r = RasterStack.from_array(["a", "b"], np.ones((2, 3, 3)))
    buf = io.BytesIO()
    write_raster(r, buf)
    clipped = buf.getvalue()[:-5]
    with pytest.raises(RasterFormatError, match="truncated"):
        read_raster(io.BytesIO(clipped))


def test_validate_ok():
    r = RasterStack.from_array(["a", "b"], np.ones((2, 3, 4)))
    assert validate(r) == []


def test_validate_duplicate_names():
    r = RasterStack.from_array(["a", "a"], np.ones((2, 2, 2)))
    problems = validate(r)
    assert len(problems) == 1
    assert "unique" in problems[0]


def test_validate_reports_every_violation():
    r = RasterStack(
        width=2,
        height=2,
        channel_names=("a",),
        values=np.array([1.0, np.nan, 2.0], dtype=np.float32),
    )
    problems = validate(r)
    assert len(problems) == 2
    assert any("length" in p for p in problems)
    assert any("non-finite" in p for p in problems)


@settings(max_examples=30, deadline=None)
@given(
    w=st.integers(1, 6),
    h=st.integers(1, 6),
    c=st.integers(1, 4),
    cell=st.floats(0.5, 100.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_roundtrip_property(w, h, c, cell, seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(c, h, w)).astype(np.float32)
    r = RasterStack.from_array([f"ch{i}" for i in range(c)], vals, cell_size_m=cell)
    back = roundtrip(r)
    assert np.array_equal(back.values, r.values)
    assert back.channel_names == r.channel_names
    assert np.float32(back.cell_size_m) == np.float32(r.cell_size_m)


def _mini_sample(img_vals=None):
    cond = RasterStack.from_array(["e"], np.zeros((1, 2, 2)))
    img = RasterStack.from_array(
        IMAGERY_BANDS, np.full((4, 2, 2), 0.5) if img_vals is None else img_vals
    )
    return cond, img


def test_sample_validates_band_names():
    cond, _ = _mini_sample()
    bad = RasterStack.from_array(["b1", "b2", "b3", "b4"], np.full((4, 2, 2), 0.5))
    with pytest.raises(ValueError, match="imagery channels"):
        Sample(id="x", lat=0, lon=0, region="east", conditions=cond, imagery=bad)


def test_sample_validates_shapes_and_range():
    cond, img = _mini_sample()
    big = RasterStack.from_array(IMAGERY_BANDS, np.full((4, 3, 3), 0.5))
    with pytest.raises(ValueError, match="share width"):
        Sample(id="x", lat=0, lon=0, region="east", conditions=cond, imagery=big)
    out_of_range = RasterStack.from_array(IMAGERY_BANDS, np.full((4, 2, 2), 1.5))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        Sample(id="x", lat=0, lon=0, region="east", conditions=cond, imagery=out_of_range)
    with pytest.raises(ValueError, match="latitude"):
        Sample(id="x", lat=91, lon=0, region="east", conditions=cond, imagery=img)
