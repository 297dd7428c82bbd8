"""Array-view bindings over the sftforge core.

Feeds packed batches straight into ML data loaders as contiguous numpy
arrays (tokens u32, labels i32, cu_seqlens u32). All packing and rendering
logic lives in the core package; nothing is reimplemented here, so the
bytes this module produces are identical to the command-line pipeline's.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from sftforge.corpus import Conversation, ReferenceTokenizer, Role, TokenizerSpec, Turn
from sftforge.hpak import (
    HpakError,
    UnsupportedVersionError,
    read_hpak_file,
    write_hpak_file,
)
from sftforge.packing import OversizedSampleError, PackedBatch, Strategy
from sftforge.packing import pack as core_pack
from sftforge.render import DEFAULT_TEMPLATE, ChatTemplate, RenderedSample
from sftforge.render import render as core_render

__version__ = "0.1.0"

__all__ = [
    "BatchView",
    "HpakError",
    "OversizedSampleError",
    "UnsupportedVersionError",
    "load_hpak",
    "pack",
    "pack_hpak",
    "render",
]


@dataclass(frozen=True)
class BatchView:
    """One packed buffer as immutable contiguous arrays.

    tokens and labels both have length == capacity; cu_seqlens has length
    n_segments + 1 and delimits the attention segments.
    """

    tokens: np.ndarray      # uint32, (capacity,)
    labels: np.ndarray      # int32, (capacity,)
    cu_seqlens: np.ndarray  # uint32, (n_segments + 1,)

    def __post_init__(self):
        if self.tokens.shape != self.labels.shape:
            raise ValueError("tokens and labels must share a shape")
        for arr in (self.tokens, self.labels, self.cu_seqlens):
            arr.setflags(write=False)

    @property
    def capacity(self) -> int:
        return int(self.tokens.shape[0])

    @property
    def n_segments(self) -> int:
        return int(self.cu_seqlens.shape[0]) - 1


def _freeze(values, dtype) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(values, dtype=dtype))


def _views(batch: PackedBatch) -> list[BatchView]:
    return [
        BatchView(
            tokens=_freeze(buf.tokens, np.uint32),
            labels=_freeze(buf.labels, np.int32),
            cu_seqlens=_freeze(buf.cu_seqlens, np.uint32),
        )
        for buf in batch.buffers
    ]


def _as_samples(samples: Iterable[tuple[Sequence[int], Sequence[int]]]) -> list[RenderedSample]:
    return [
        RenderedSample(tokens=list(tokens), labels=list(labels))
        for tokens, labels in samples
    ]


def _resolve_strategy(strategy: str | Strategy) -> Strategy:
    return strategy if isinstance(strategy, Strategy) else Strategy(strategy)


def pack(
    samples: Iterable[tuple[Sequence[int], Sequence[int]]],
    capacity: int,
    strategy: str | Strategy = Strategy.FIRST_FIT_DECREASING,
    *,
    pad_as_segment: bool = True,
    truncate_oversize: bool = False,
    tokenizer: TokenizerSpec | None = None,
) -> list[BatchView]:
    """Pack (tokens, labels) pairs and return per-buffer array views.

    Numerically identical to the core packer; OversizedSampleError and
    friends propagate unchanged.
    """
    tok = tokenizer if tokenizer is not None else ReferenceTokenizer()
    batch = core_pack(
        _as_samples(samples),
        capacity,
        _resolve_strategy(strategy),
        tok,
        pad_as_segment=pad_as_segment,
        truncate_oversize=truncate_oversize,
    )
    return _views(batch)


def pack_hpak(
    samples: Iterable[tuple[Sequence[int], Sequence[int]]],
    path,
    capacity: int,
    strategy: str | Strategy = Strategy.FIRST_FIT_DECREASING,
    *,
    pad_as_segment: bool = True,
    truncate_oversize: bool = False,
    tokenizer: TokenizerSpec | None = None,
) -> list[BatchView]:
    """Pack and persist to an HPAK file through the core writer; returns the
    same views pack() would."""
    tok = tokenizer if tokenizer is not None else ReferenceTokenizer()
    batch = core_pack(
        _as_samples(samples),
        capacity,
        _resolve_strategy(strategy),
        tok,
        pad_as_segment=pad_as_segment,
        truncate_oversize=truncate_oversize,
    )
    write_hpak_file(batch, path)
    return _views(batch)


def load_hpak(path) -> list[BatchView]:
    """Read an HPAK file into array views.

    Raises HpakError on a bad magic or truncation and
    UnsupportedVersionError on a version mismatch.
    """
    hpak = read_hpak_file(path)
    return [
        BatchView(
            tokens=np.ascontiguousarray(buf.tokens, dtype=np.uint32),
            labels=np.ascontiguousarray(buf.labels, dtype=np.int32),
            cu_seqlens=np.ascontiguousarray(buf.cu_seqlens, dtype=np.uint32),
        )
        for buf in hpak.buffers
    ]


def render(
    messages: Iterable[dict],
    *,
    conversation_id: str = "bound",
    template: ChatTemplate = DEFAULT_TEMPLATE,
    tokenizer: TokenizerSpec | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Render [{role, content}, ...] to (tokens u32, labels i32) arrays."""
    tok = tokenizer if tokenizer is not None else ReferenceTokenizer()
    conv = Conversation(
        id=conversation_id,
        turns=tuple(Turn(Role.parse(m["role"]), m["content"]) for m in messages),
    )
    sample = core_render(conv, template, tok)
    tokens = _freeze(sample.tokens, np.uint32)
    labels = _freeze(sample.labels, np.int32)
    tokens.setflags(write=False)
    labels.setflags(write=False)
    return tokens, labels
