"""Variable-length sample packing into fixed-capacity buffers.

Each buffer carries a cumulative boundary array (cu_seqlens) so that a
varlen-attention kernel can keep every packed sample in its own attention
segment. Three placement strategies:

  contiguous            arrival order, fill the current buffer until the next
                        sample no longer fits (one flat buffer when the whole
                        corpus fits in a single capacity)
  first_fit             arrival order, each sample goes to the first buffer
                        with room
  first_fit_decreasing  sort by length descending (stable on input index),
                        then first-fit

Padding occupies the tail of a buffer. By default the pad run becomes its
own final segment with all-ignore labels, so pad positions can never attend
into a real sample; ``pad_as_segment=False`` folds the pads into the last
real segment instead.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import TokenizerSpec
from .render import IGNORE_LABEL, RenderedSample


class Strategy(enum.Enum):
    CONTIGUOUS = "contiguous"
    FIRST_FIT = "first_fit"
    FIRST_FIT_DECREASING = "first_fit_decreasing"


class OversizedSampleError(ValueError):
    def __init__(self, index: int, length: int, capacity: int, sample_id: str | None = None):
        ident = f" (id={sample_id!r})" if sample_id else ""
        super().__init__(
            f"sample {index}{ident} has {length} tokens, over capacity {capacity}"
        )
        self.index = index
        self.length = length
        self.capacity = capacity
        self.sample_id = sample_id


class BoundaryError(ValueError):
    """A buffer's cu_seqlens array is inconsistent with its contents."""


@dataclass(frozen=True)
class PackingPlan:
    strategy: Strategy
    capacity: int
    # one (buffer index, offset) per input sample, in input order
    assignments: list[tuple[int, int]]
    n_buffers: int


def plan_packing(
    lengths: Sequence[int], capacity: int, strategy: Strategy
) -> PackingPlan:
    """Assign samples of the given lengths to buffers.

    Deterministic in (lengths order, strategy). Raises OversizedSampleError
    for any length over capacity.
    """
    if capacity <= 0:
        raise ValueError("capacity must be positive")
    for i, length in enumerate(lengths):
        if length <= 0:
            raise ValueError(f"sample {i} has nonpositive length {length}")
        if length > capacity:
            raise OversizedSampleError(i, length, capacity)

    assignments: list[tuple[int, int] | None] = [None] * len(lengths)

    if strategy is Strategy.CONTIGUOUS:
        buf, used = 0, 0
        for i, length in enumerate(lengths):
            if used + length > capacity:
                buf += 1
                used = 0
            assignments[i] = (buf, used)
            used += length
        n_buffers = buf + 1 if lengths else 0
    else:
        order = list(range(len(lengths)))
        if strategy is Strategy.FIRST_FIT_DECREASING:
            order.sort(key=lambda i: (-lengths[i], i))
        free: list[int] = []  # remaining space per buffer
        offsets: list[int] = []
        for i in order:
            length = lengths[i]
            for b in range(len(free)):
                if free[b] >= length:
                    break
            else:
                b = len(free)
                free.append(capacity)
                offsets.append(0)
            assignments[i] = (b, offsets[b])
            offsets[b] += length
            free[b] -= length
        n_buffers = len(free)

    return PackingPlan(strategy=strategy, capacity=capacity,
                       assignments=assignments, n_buffers=n_buffers)


@dataclass(frozen=True)
class PackedBuffer:
    tokens: list[int]
    labels: list[int]
    cu_seqlens: list[int]
    pad_count: int


@dataclass(frozen=True)
class PackedBatch:
    capacity: int
    buffers: list[PackedBuffer]
    pad_token_id: int
    pad_as_segment: bool = True
    truncated: int = 0  # number of samples whose tails were cut off

    @property
    def n_buffers(self) -> int:
        return len(self.buffers)


def pack(
    samples: Sequence[RenderedSample],
    capacity: int,
    strategy: Strategy,
    tok: TokenizerSpec,
    pad_as_segment: bool = True,
    truncate_oversize: bool = False,
) -> PackedBatch:
    """Pack rendered samples into fixed-capacity buffers.

    The pad token id comes from the tokenizer registry ("pad"); packing with
    an unregistered pad token is an error rather than silently using id 0.
    Oversized samples raise unless ``truncate_oversize`` cuts their tails.
    """
    pad_id = tok.special("pad")

    work: list[RenderedSample] = []
    truncated = 0
    for i, s in enumerate(samples):
        if len(s) > capacity:
            if not truncate_oversize:
                raise OversizedSampleError(i, len(s), capacity, s.id)
            work.append(RenderedSample(s.tokens[:capacity], s.labels[:capacity], id=s.id))
            truncated += 1
        else:
            work.append(s)

    plan = plan_packing([len(s) for s in work], capacity, strategy)

    per_buffer: list[list[tuple[int, RenderedSample]]] = [[] for _ in range(plan.n_buffers)]
    for s, (buf, offset) in zip(work, plan.assignments):
        per_buffer[buf].append((offset, s))

    buffers = []
    for contents in per_buffer:
        contents.sort(key=lambda pair: pair[0])
        tokens: list[int] = []
        labels: list[int] = []
        bounds = [0]
        for offset, s in contents:
            if offset != len(tokens):
                raise BoundaryError("plan produced non-contiguous offsets")
            tokens.extend(s.tokens)
            labels.extend(s.labels)
            bounds.append(len(tokens))
        pad_count = capacity - len(tokens)
        if pad_count:
            tokens.extend([pad_id] * pad_count)
            labels.extend([IGNORE_LABEL] * pad_count)
            if pad_as_segment:
                bounds.append(capacity)
            else:
                bounds[-1] = capacity
        buffers.append(PackedBuffer(tokens, labels, bounds, pad_count))

    return PackedBatch(
        capacity=capacity,
        buffers=buffers,
        pad_token_id=pad_id,
        pad_as_segment=pad_as_segment,
        truncated=truncated,
    )


@dataclass(frozen=True)
class EfficiencyReport:
    total_capacity: int
    real_tokens: int
    pad_tokens: int

    @property
    def efficiency(self) -> float:
        if self.total_capacity == 0:
            return 0.0
        return round(self.real_tokens / self.total_capacity, 4)

    def to_dict(self) -> dict:
        return {
            "total_capacity": self.total_capacity,
            "real_tokens": self.real_tokens,
            "pad_tokens": self.pad_tokens,
            "efficiency": self.efficiency,
        }


def efficiency(batch: PackedBatch) -> EfficiencyReport:
    pad = sum(b.pad_count for b in batch.buffers)
    total = batch.capacity * batch.n_buffers
    return EfficiencyReport(total_capacity=total, real_tokens=total - pad, pad_tokens=pad)


def _check_boundaries(buf: PackedBuffer, capacity: int):
    cs = buf.cu_seqlens
    if not cs or cs[0] != 0:
        raise BoundaryError("cu_seqlens must start at 0")
    if any(b >= c for b, c in zip(cs, cs[1:])):
        raise BoundaryError("cu_seqlens must be strictly increasing")
    if cs[-1] > capacity:
        raise BoundaryError("cu_seqlens exceeds capacity")
    if len(buf.tokens) != capacity or len(buf.labels) != capacity:
        raise BoundaryError("buffer arrays must match capacity")
    if buf.pad_count and cs[-1] != capacity:
        raise BoundaryError("padded buffer must be bounded at capacity")


def unpack(batch: PackedBatch) -> list[tuple[list[int], list[int]]]:
    """Split a batch back into (tokens, labels) per packed sample.

    Pad regions are excluded: the trailing pad segment is dropped in the
    default layout, or the trailing pad_count positions are stripped from
    the final segment in the folded layout. Order of samples is the buffer
    concatenation order.
    """
    out: list[tuple[list[int], list[int]]] = []
    for buf in batch.buffers:
        _check_boundaries(buf, batch.capacity)
        segments = list(zip(buf.cu_seqlens, buf.cu_seqlens[1:]))
        if buf.pad_count:
            if batch.pad_as_segment:
                lo, hi = segments[-1]
                if hi - lo != buf.pad_count:
                    raise BoundaryError("pad segment length disagrees with pad_count")
                segments = segments[:-1]
            else:
                lo, hi = segments[-1]
                if hi - lo < buf.pad_count:
                    raise BoundaryError("pad_count exceeds final segment")
                segments[-1] = (lo, hi - buf.pad_count)
                if segments[-1][0] == segments[-1][1]:
                    segments = segments[:-1]
        for lo, hi in segments:
            out.append((buf.tokens[lo:hi], buf.labels[lo:hi]))
    return out
