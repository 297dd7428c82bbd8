"""HPAK: the packed-batch container format.

Little-endian layout:

    magic   4 bytes  "HPAK"
    u32     version (= 1)
    u32     capacity
    u32     n_buffers
    then per buffer:
        u32  n_segments
        u32  cu_seqlens[n_segments + 1]
        u32  tokens[capacity]
        i32  labels[capacity]

The file holds raw arrays only; strategy, tokenizer identity, pad counts,
and efficiency live in the sidecar JSON manifest written next to it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from .packing import PackedBatch

MAGIC = b"HPAK"
VERSION = 1

_HEADER = struct.Struct("<4sIII")
_U32 = struct.Struct("<I")


class HpakError(ValueError):
    """Malformed or truncated HPAK data."""


class UnsupportedVersionError(HpakError):
    def __init__(self, version: int):
        super().__init__(f"unsupported HPAK version {version} (expected {VERSION})")
        self.version = version


@dataclass(frozen=True)
class HpakBuffer:
    cu_seqlens: np.ndarray  # uint32, n_segments + 1
    tokens: np.ndarray      # uint32, capacity
    labels: np.ndarray      # int32, capacity


@dataclass(frozen=True)
class HpakFile:
    capacity: int
    buffers: list[HpakBuffer]


def _u32_array(values, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() > 0xFFFFFFFF):
        raise HpakError(f"{what} out of u32 range")
    return arr.astype("<u4")


def write_hpak(batch: PackedBatch, fp: BinaryIO) -> None:
    fp.write(_HEADER.pack(MAGIC, VERSION, batch.capacity, batch.n_buffers))
    for buf in batch.buffers:
        n_segments = len(buf.cu_seqlens) - 1
        fp.write(_U32.pack(n_segments))
        fp.write(_u32_array(buf.cu_seqlens, "cu_seqlens").tobytes())
        fp.write(_u32_array(buf.tokens, "tokens").tobytes())
        fp.write(np.asarray(buf.labels, dtype="<i4").tobytes())


def write_hpak_file(batch: PackedBatch, path) -> None:
    with open(path, "wb") as fp:
        write_hpak(batch, fp)


def _read_exact(fp: BinaryIO, n: int, what: str) -> bytes:
    data = fp.read(n)
    if len(data) != n:
        raise HpakError(f"truncated file while reading {what}")
    return data


def read_hpak(fp: BinaryIO) -> HpakFile:
    magic, version, capacity, n_buffers = _HEADER.unpack(
        _read_exact(fp, _HEADER.size, "header")
    )
    if magic != MAGIC:
        raise HpakError(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersionError(version)
    if capacity == 0:
        raise HpakError("capacity must be positive")
    buffers = []
    for b in range(n_buffers):
        (n_segments,) = _U32.unpack(_read_exact(fp, 4, f"buffer {b} segment count"))
        cu = np.frombuffer(
            _read_exact(fp, 4 * (n_segments + 1), f"buffer {b} cu_seqlens"), dtype="<u4"
        )
        tokens = np.frombuffer(
            _read_exact(fp, 4 * capacity, f"buffer {b} tokens"), dtype="<u4"
        )
        labels = np.frombuffer(
            _read_exact(fp, 4 * capacity, f"buffer {b} labels"), dtype="<i4"
        )
        if cu[0] != 0 or np.any(np.diff(cu.astype(np.int64)) <= 0) or cu[-1] > capacity:
            raise HpakError(f"buffer {b} has corrupt cu_seqlens")
        buffers.append(HpakBuffer(cu_seqlens=cu, tokens=tokens, labels=labels))
    trailing = fp.read(1)
    if trailing:
        raise HpakError("trailing bytes after final buffer")
    return HpakFile(capacity=capacity, buffers=buffers)


def read_hpak_file(path) -> HpakFile:
    with open(path, "rb") as fp:
        return read_hpak(fp)
