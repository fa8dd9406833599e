"""Raster data model and the LSCP on-disk interchange format.

LSCP layout (little-endian throughout): magic ``4C 53 43 50``, u16
version, u16 channels, u32 width, u32 height, f32 cell size in meters,
u32 name-blob length, UTF-8 channel names joined by ``\\n``, then
width*height*channels f32 values, band-sequential with each band
row-major (row 0 at the top). The same raster serializes to identical
bytes on any platform.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

LSCP_MAGIC = b"LSCP"
LSCP_VERSION = 1
_HEADER = struct.Struct("<4sHHIIfI")

IMAGERY_BANDS = ("blue", "green", "red", "nir")


class RasterFormatError(ValueError):
    """Malformed LSCP stream: bad magic, version, or truncation."""


class RasterValidationError(ValueError):
    """A RasterStack violates one or more of its invariants."""


@dataclass(frozen=True)
class RasterStack:
    """Multi-channel 2-D grid of 32-bit reals with named channels.

    ``values`` is the flat band-sequential, row-major float32 buffer;
    use :meth:`from_array` / :attr:`data` for the (channels, height,
    width) view. Instances are immutable and safe to share across
    threads.
    """

    width: int
    height: int
    channel_names: tuple[str, ...]
    values: np.ndarray
    cell_size_m: float = 43.0

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))

    @classmethod
    def from_array(
        cls,
        channel_names: Sequence[str],
        array: np.ndarray,
        cell_size_m: float = 43.0,
    ) -> "RasterStack":
        """Build from a (channels, height, width) array."""
        array = np.asarray(array)
        if array.ndim == 2:
            array = array[np.newaxis, :, :]
        if array.ndim != 3:
            raise RasterValidationError(
                f"expected (channels, height, width) array, got shape {array.shape}"
            )
        c, h, w = array.shape
        if c != len(channel_names):
            raise RasterValidationError(
                f"{len(channel_names)} channel names for {c} array channels"
            )
        return cls(
            width=w,
            height=h,
            channel_names=tuple(channel_names),
            values=array.astype(np.float32).reshape(-1),
            cell_size_m=float(cell_size_m),
        )

    @property
    def channels(self) -> int:
        return len(self.channel_names)

    @property
    def data(self) -> np.ndarray:
        """(channels, height, width) read-only view of the values."""
        return self.values.reshape(self.channels, self.height, self.width)

    def band_index(self, name: str) -> int:
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise KeyError(f"no channel named {name!r}") from None

    def channel(self, name: str) -> np.ndarray:
        """(height, width) view of one named channel."""
        return self.data[self.band_index(name)]

    def with_channel(self, name: str, new_values: np.ndarray) -> "RasterStack":
        """Copy with one channel replaced (stacks are immutable)."""
        data = np.array(self.data)
        data[self.band_index(name)] = new_values
        return RasterStack.from_array(self.channel_names, data, self.cell_size_m)


def validate(r: RasterStack) -> list[str]:
    """Return every violated invariant (empty list means valid)."""
    problems: list[str] = []
    if r.width < 1:
        problems.append(f"width must be positive, got {r.width}")
    if r.height < 1:
        problems.append(f"height must be positive, got {r.height}")
    if r.channels < 1:
        problems.append("at least one channel is required")
    if len(set(r.channel_names)) != len(r.channel_names):
        problems.append(f"channel names are not unique: {r.channel_names}")
    if any("\n" in name for name in r.channel_names):
        problems.append("channel names must not contain newlines")
    expected = r.width * r.height * r.channels
    if r.values.size != expected:
        problems.append(
            f"values length {r.values.size} != width*height*channels = {expected}"
        )
    if not np.all(np.isfinite(r.values)):
        bad = int(np.count_nonzero(~np.isfinite(r.values)))
        problems.append(f"{bad} non-finite value(s)")
    if not (r.cell_size_m > 0):
        problems.append(f"cell_size_m must be positive, got {r.cell_size_m}")
    return problems


def write_raster(r: RasterStack, sink: BinaryIO) -> int:
    """Serialize to LSCP; returns the number of bytes written."""
    problems = validate(r)
    if problems:
        raise RasterValidationError("; ".join(problems))
    name_blob = "\n".join(r.channel_names).encode("utf-8")
    header = _HEADER.pack(
        LSCP_MAGIC,
        LSCP_VERSION,
        r.channels,
        r.width,
        r.height,
        r.cell_size_m,
        len(name_blob),
    )
    payload = r.values.astype("<f4").tobytes()
    sink.write(header)
    sink.write(name_blob)
    sink.write(payload)
    return len(header) + len(name_blob) + len(payload)


def read_raster(source: BinaryIO) -> RasterStack:
    """Parse an LSCP stream into a validated RasterStack."""
    header = source.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise RasterFormatError("truncated header")
    magic, version, channels, width, height, cell_size_m, blob_len = _HEADER.unpack(
        header
    )
    if magic != LSCP_MAGIC:
        raise RasterFormatError(f"bad magic {magic!r}")
    if version != LSCP_VERSION:
        raise RasterFormatError(f"unsupported version {version}")
    name_blob = source.read(blob_len)
    if len(name_blob) < blob_len:
        raise RasterFormatError("truncated channel-name blob")
    names = tuple(name_blob.decode("utf-8").split("\n")) if blob_len else ()
    if len(names) != channels:
        raise RasterFormatError(
            f"{len(names)} channel names for {channels} declared channels"
        )
    n_values = width * height * channels
    payload = source.read(n_values * 4)
    if len(payload) < n_values * 4:
        raise RasterFormatError(
            f"truncated payload: expected {n_values * 4} bytes, got {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    r = RasterStack(
        width=width,
        height=height,
        channel_names=names,
        values=values,
        cell_size_m=cell_size_m,
    )
    problems = validate(r)
    if problems:
        raise RasterValidationError("; ".join(problems))
    return r


def write_raster_file(r: RasterStack, path: str | Path) -> int:
    with open(path, "wb") as f:
        return write_raster(r, f)


def read_raster_file(path: str | Path) -> RasterStack:
    with open(path, "rb") as f:
        return read_raster(f)


@dataclass(frozen=True)
class Sample:
    """One geolocated pairing of a conditions stack with 4-band imagery."""

    id: str
    lat: float
    lon: float
    region: str
    conditions: RasterStack
    imagery: RasterStack

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if (self.conditions.width, self.conditions.height) != (
            self.imagery.width,
            self.imagery.height,
        ):
            raise ValueError("conditions and imagery must share width and height")
        if self.imagery.channel_names != IMAGERY_BANDS:
            raise ValueError(
                f"imagery channels must be {IMAGERY_BANDS}, got {self.imagery.channel_names}"
            )
        vals = self.imagery.values
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            raise ValueError("imagery reflectance must lie in [0, 1]")
