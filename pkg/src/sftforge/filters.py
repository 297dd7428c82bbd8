"""Composable quality filters over conversations, with a drop-reason report.

Stages are pure per-conversation predicates except source prioritization,
which needs the whole corpus (it groups duplicates and keeps the copy from
the strongest source model).
"""

from __future__ import annotations

import enum
import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Iterator

from .corpus import Conversation, Role, TokenizerSpec


class DropReason(enum.Enum):
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    REFUSAL = "Refusal"
    MALFORMED = "Malformed"
    EMPTY_TURN = "EmptyTurn"
    MISSING_TURN = "MissingTurn"
    DUPLICATE_LOWER_RANK = "DuplicateLowerRank"


@dataclass(frozen=True)
class FilterDecision:
    kept: bool
    reason: DropReason | None = None

    def __post_init__(self):
        if self.kept == (self.reason is not None):
            raise ValueError("reason must be present exactly when dropped")


KEPT = FilterDecision(True)


def default_refusal_patterns() -> list[str]:
    with resources.files("sftforge.data").joinpath("refusal_patterns.json").open() as f:
        return json.load(f)


@dataclass
class FilterConfig:
    min_tokens: int = 1
    max_tokens: int = 8192
    refusal_patterns: list[str] = field(default_factory=default_refusal_patterns)
    refusal_window: int = 160
    model_rank: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.min_tokens < 0:
            raise ValueError("min_tokens must be nonnegative")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.min_tokens > self.max_tokens:
            raise ValueError("min_tokens must not exceed max_tokens")
        if len(set(self.model_rank)) != len(self.model_rank):
            raise ValueError("model_rank contains duplicates")

    def to_dict(self) -> dict:
        return {
            "min_tokens": self.min_tokens,
            "max_tokens": self.max_tokens,
            "refusal_patterns": list(self.refusal_patterns),
            "refusal_window": self.refusal_window,
            "model_rank": list(self.model_rank),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterConfig":
        kwargs = {k: d[k] for k in (
            "min_tokens", "max_tokens", "refusal_patterns", "refusal_window", "model_rank"
        ) if k in d}
        return cls(**kwargs)


def filter_length(conv: Conversation, tok: TokenizerSpec, cfg: FilterConfig) -> FilterDecision:
    """Keep iff the total token count over all turn contents lies in
    [min_tokens, max_tokens], bounds inclusive."""
    total = sum(len(tok.encode(t.content)) for t in conv.turns)
    if total < cfg.min_tokens:
        return FilterDecision(False, DropReason.TOO_SHORT)
    if total > cfg.max_tokens:
        return FilterDecision(False, DropReason.TOO_LONG)
    return KEPT


def filter_refusal(conv: Conversation, cfg: FilterConfig) -> FilterDecision:
    """Drop when any assistant turn opens with a refusal phrase.

    Only the first ``refusal_window`` characters of each assistant turn are
    scanned (case-insensitively) so that refusals quoted deep inside an
    otherwise fine answer do not trigger false positives. Non-assistant turns
    are never inspected.
    """
    patterns = [p.lower() for p in cfg.refusal_patterns]
    for turn in conv.turns:
        if turn.role is not Role.ASSISTANT:
            continue
        window = turn.content[: cfg.refusal_window].lower()
        if any(p in window for p in patterns):
            return FilterDecision(False, DropReason.REFUSAL)
    return KEPT


def filter_structure(conv: Conversation) -> FilterDecision:
    """Structural shape check.

    EmptyTurn: any turn whose content is empty or whitespace-only.
    MissingTurn: the final turn is not an assistant turn, or user/assistant
    turns fail to alternate after the optional leading system turn (a tool
    turn is allowed only immediately after an assistant turn).
    Malformed: anything else (system turn out of position, duplicated, ...).
    """
    if any(not t.content.strip() for t in conv.turns):
        return FilterDecision(False, DropReason.EMPTY_TURN)
    if not conv.turns:
        return FilterDecision(False, DropReason.MISSING_TURN)

    turns = list(conv.turns)
    if sum(1 for t in turns if t.role is Role.SYSTEM) > 1:
        return FilterDecision(False, DropReason.MALFORMED)
    if any(t.role is Role.SYSTEM for t in turns[1:]):
        return FilterDecision(False, DropReason.MALFORMED)
    if turns and turns[0].role is Role.SYSTEM:
        turns = turns[1:]

    if not turns or turns[-1].role is not Role.ASSISTANT:
        return FilterDecision(False, DropReason.MISSING_TURN)
    expect = Role.USER
    prev: Role | None = None
    for t in turns:
        if t.role is Role.TOOL:
            if prev is not Role.ASSISTANT:
                return FilterDecision(False, DropReason.MISSING_TURN)
            expect = Role.ASSISTANT  # tool output needs an assistant reply
        else:
            if t.role is not expect:
                return FilterDecision(False, DropReason.MISSING_TURN)
            expect = Role.USER if t.role is Role.ASSISTANT else Role.ASSISTANT
        prev = t.role
    return KEPT


def duplicate_key(conv: Conversation) -> str:
    """Hash of the concatenated non-assistant turn contents.

    Two conversations that pose the same prompts (regardless of how each was
    answered) share a key and count as duplicates of one another.
    """
    h = hashlib.sha256()
    for t in conv.turns:
        if t.role is not Role.ASSISTANT:
            h.update(t.content.encode("utf-8"))
            h.update(b"\x1f")
    return h.hexdigest()


def _rank_of(source_model: str | None, cfg: FilterConfig) -> int:
    # Unranked sources sort after every ranked one.
    if source_model is not None and source_model in cfg.model_rank:
        return cfg.model_rank.index(source_model)
    return len(cfg.model_rank)


def best_by_source(
    convs: Iterable[tuple[int, Conversation]], cfg: FilterConfig
) -> dict[str, tuple[int, int, Conversation]]:
    """Fold (position, conversation) pairs into the best candidate per
    duplicate key, where best = (lowest rank index, earliest position).

    The fold is associative: partial indexes built over shards merge with
    merge_best into the same result as a single pass.
    """
    index: dict[str, tuple[int, int, Conversation]] = {}
    for pos, conv in convs:
        key = duplicate_key(conv)
        cand = (_rank_of(conv.source_model, cfg), pos, conv)
        cur = index.get(key)
        if cur is None or cand[:2] < cur[:2]:
            index[key] = cand
    return index


def merge_best(
    a: dict[str, tuple[int, int, Conversation]],
    b: dict[str, tuple[int, int, Conversation]],
) -> dict[str, tuple[int, int, Conversation]]:
    out = dict(a)
    for key, cand in b.items():
        cur = out.get(key)
        if cur is None or cand[:2] < cur[:2]:
            out[key] = cand
    return out


def prioritize_sources(
    convs: list[Conversation], cfg: FilterConfig
) -> tuple[list[Conversation], list[Conversation]]:
    """Deduplicate by prompt content, keeping the strongest-sourced copy.

    Within each duplicate group exactly one conversation survives: the one
    whose source_model ranks best in cfg.model_rank (ties broken by first
    occurrence). Both returned lists preserve input order.
    """
    index = best_by_source(enumerate(convs), cfg)
    winners = {pos for _, pos, _ in index.values()}
    kept = [c for pos, c in enumerate(convs) if pos in winners]
    dropped = [c for pos, c in enumerate(convs) if pos not in winners]
    return kept, dropped


STAGE_STRUCTURE = "structure"
STAGE_LENGTH = "length"
STAGE_REFUSAL = "refusal"
STAGE_PRIORITIZE = "prioritize"
DEFAULT_STAGE_ORDER = (STAGE_STRUCTURE, STAGE_LENGTH, STAGE_REFUSAL, STAGE_PRIORITIZE)
ALL_STAGES = frozenset(DEFAULT_STAGE_ORDER)


@dataclass
class StageCount:
    seen: int = 0
    kept: int = 0
    dropped: Counter = field(default_factory=Counter)

    def record(self, decision: FilterDecision):
        self.seen += 1
        if decision.kept:
            self.kept += 1
        else:
            self.dropped[decision.reason.value] += 1


@dataclass
class FilterReport:
    stage_order: tuple[str, ...]
    stages: dict[str, StageCount]
    total_in: int = 0
    total_kept: int = 0
    ingest_errors: int = 0

    @classmethod
    def empty(cls, stage_order: Iterable[str]) -> "FilterReport":
        order = tuple(stage_order)
        return cls(stage_order=order, stages={s: StageCount() for s in order})

    @property
    def total_dropped(self) -> int:
        return sum(sum(c.dropped.values()) for c in self.stages.values())

    def to_dict(self) -> dict:
        return {
            "total_in": self.total_in,
            "total_kept": self.total_kept,
            "total_dropped": self.total_dropped,
            "ingest_errors": self.ingest_errors,
            "stages": [
                {
                    "stage": name,
                    "seen": c.seen,
                    "kept": c.kept,
                    "dropped": dict(sorted(c.dropped.items())),
                }
                for name, c in ((s, self.stages[s]) for s in self.stage_order)
            ],
        }


def run_pipeline(
    convs: Iterable[Conversation],
    tok: TokenizerSpec,
    cfg: FilterConfig,
    stage_order: Iterable[str] = DEFAULT_STAGE_ORDER,
    ingest_errors: int = 0,
) -> tuple[Iterator[Conversation], FilterReport]:
    """Apply filter stages in order, short-circuiting on the first drop.

    Returns a lazy stream of survivors plus a report that is complete once
    the stream has been fully consumed. Every input conversation is counted
    exactly once: either kept, or dropped at exactly one stage. The
    prioritize stage is a gathering barrier; stages after it stay lazy.
    """
    order = tuple(stage_order)
    unknown = set(order) - ALL_STAGES
    if unknown:
        raise ValueError(f"unknown stages: {sorted(unknown)}")
    if len(set(order)) != len(order):
        raise ValueError("stage_order repeats a stage")
    report = FilterReport.empty(order)
    report.ingest_errors = ingest_errors

    def scalar_decision(stage: str, conv: Conversation) -> FilterDecision:
        if stage == STAGE_STRUCTURE:
            return filter_structure(conv)
        if stage == STAGE_LENGTH:
            return filter_length(conv, tok, cfg)
        return filter_refusal(conv, cfg)

    def count_in(stream):
        for conv in stream:
            report.total_in += 1
            yield conv

    def apply_scalar(stream, stage):
        counts = report.stages[stage]
        for conv in stream:
            decision = scalar_decision(stage, conv)
            counts.record(decision)
            if decision.kept:
                yield conv

    def apply_prioritize(stream):
        batch = list(stream)
        kept, dropped = prioritize_sources(batch, cfg)
        counts = report.stages[STAGE_PRIORITIZE]
        counts.seen = len(batch)
        counts.kept = len(kept)
        if dropped:
            counts.dropped[DropReason.DUPLICATE_LOWER_RANK.value] = len(dropped)
        yield from kept

    def count_out(stream):
        for conv in stream:
            report.total_kept += 1
            yield conv

    stream: Iterator[Conversation] = count_in(iter(convs))
    for stage in order:
        if stage == STAGE_PRIORITIZE:
            stream = apply_prioritize(stream)
        else:
            stream = apply_scalar(stream, stage)
    return count_out(stream), report
