"""Reader/writer for the LSCP raster interchange format.

Little-endian throughout: magic ``LSCP``, u16 version (1), u16 channels,
u32 width, u32 height, f32 cell size (m), u32 name-blob length, UTF-8
channel names joined by newlines, then width*height*channels f32 values,
band-sequential and row-major per band. This module is self-contained so
the trainer only touches the evaluation toolkit through files.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_MAGIC = b"LSCP"
_VERSION = 1
_HEADER = struct.Struct("<4sHHIIfI")


@dataclass(frozen=True)
class Raster:
    channel_names: tuple[str, ...]
    data: np.ndarray  # (channels, height, width) float32
    cell_size_m: float

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def height(self) -> int:
        return self.data.shape[1]


def read_lscp(path: str | Path) -> Raster:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, channels, width, height, cell, blob_len = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    names = raw[_HEADER.size : _HEADER.size + blob_len].decode("utf-8").split("\n")
    if len(names) != channels:
        raise ValueError(f"{path}: {len(names)} names for {channels} channels")
    offset = _HEADER.size + blob_len
    count = width * height * channels
    values = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
    if values.size != count:
        raise ValueError(f"{path}: truncated payload")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite values")
    return Raster(
        channel_names=tuple(names),
        data=values.reshape(channels, height, width).copy(),
        cell_size_m=cell,
    )


def write_lscp(raster: Raster, path: str | Path) -> None:
    data = np.ascontiguousarray(raster.data, dtype=np.float32)
    if not np.all(np.isfinite(data)):
        raise ValueError("refusing to write non-finite values")
    c, h, w = data.shape
    if c != len(raster.channel_names):
        raise ValueError("channel name count mismatch")
    blob = "\n".join(raster.channel_names).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, _VERSION, c, w, h, raster.cell_size_m, len(blob)))
        f.write(blob)
        f.write(data.astype("<f4").tobytes())
