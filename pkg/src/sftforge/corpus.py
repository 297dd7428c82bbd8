"""Core conversation types, JSONL ingestion, and the tokenizer contract."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Protocol


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"
    TOOL = "tool"

    @classmethod
    def parse(cls, value: str) -> "Role":
        try:
            return cls(value)
        except ValueError:
            raise UnknownRoleError(value) from None


class UnknownRoleError(ValueError):
    def __init__(self, role: str):
        super().__init__(f"unknown role: {role!r}")
        self.role = role


@dataclass(frozen=True)
class Turn:
    role: Role
    content: str


@dataclass(frozen=True)
class Conversation:
    """One multi-turn dialogue.

    ``meta`` holds any record fields beyond the known schema so that
    round-tripping through JSONL does not lose information.
    """

    id: str
    turns: tuple[Turn, ...]
    source_model: str | None = None
    category: str | None = None
    meta: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec: dict = {"id": self.id}
        if self.source_model is not None:
            rec["source_model"] = self.source_model
        if self.category is not None:
            rec["category"] = self.category
        rec["messages"] = [
            {"role": t.role.value, "content": t.content} for t in self.turns
        ]
        rec.update(self.meta)
        return rec


class RecordErrorKind(enum.Enum):
    BAD_JSON = "BadJson"
    NOT_AN_OBJECT = "NotAnObject"
    MISSING_FIELD = "MissingField"
    BAD_FIELD = "BadField"
    UNKNOWN_ROLE = "UnknownRole"


@dataclass(frozen=True)
class RecordError:
    kind: RecordErrorKind
    line: int
    message: str


_KNOWN_FIELDS = {"id", "source_model", "category", "messages"}


def _parse_record(obj: dict, line: int) -> Conversation:
    if not isinstance(obj.get("id"), str):
        raise _Reject(RecordErrorKind.MISSING_FIELD, "record needs a string 'id'")
    messages = obj.get("messages")
    if not isinstance(messages, list):
        raise _Reject(RecordErrorKind.MISSING_FIELD, "record needs a 'messages' list")
    source_model = obj.get("source_model")
    category = obj.get("category")
    for name, value in (("source_model", source_model), ("category", category)):
        if value is not None and not isinstance(value, str):
            raise _Reject(RecordErrorKind.BAD_FIELD, f"{name} must be a string")
    turns = []
    for msg in messages:
        if not isinstance(msg, dict) or not isinstance(msg.get("content"), str):
            raise _Reject(RecordErrorKind.BAD_FIELD, "each message needs string 'content'")
        role_raw = msg.get("role")
        if not isinstance(role_raw, str):
            raise _Reject(RecordErrorKind.BAD_FIELD, "each message needs string 'role'")
        try:
            role = Role.parse(role_raw)
        except UnknownRoleError as exc:
            raise _Reject(RecordErrorKind.UNKNOWN_ROLE, str(exc)) from None
        turns.append(Turn(role, msg["content"]))
    meta = {k: v for k, v in obj.items() if k not in _KNOWN_FIELDS}
    return Conversation(
        id=obj["id"],
        turns=tuple(turns),
        source_model=source_model,
        category=category,
        meta=meta,
    )


class _Reject(Exception):
    def __init__(self, kind: RecordErrorKind, message: str):
        self.kind = kind
        self.message = message


def ingest(
    lines: Iterable[str], errors: list[RecordError] | None = None
) -> Iterator[Conversation]:
    """Parse line-delimited JSON conversation records.

    Yields conversations in input order. A malformed line is skipped and
    recorded (with its 1-based line number) in ``errors``; the stream
    continues, so ``len(yielded) + len(errors)`` always equals the number of
    non-blank input lines.
    """
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            if errors is not None:
                errors.append(RecordError(RecordErrorKind.BAD_JSON, lineno, str(exc)))
            continue
        if not isinstance(obj, dict):
            if errors is not None:
                errors.append(
                    RecordError(
                        RecordErrorKind.NOT_AN_OBJECT, lineno, "line is not an object"
                    )
                )
            continue
        try:
            yield _parse_record(obj, lineno)
        except _Reject as exc:
            if errors is not None:
                errors.append(RecordError(exc.kind, lineno, exc.message))


def write_records(convs: Iterable[Conversation], fp) -> int:
    """Write conversations back out as JSONL; returns the line count."""
    n = 0
    for conv in convs:
        fp.write(json.dumps(conv.to_record(), ensure_ascii=False) + "\n")
        n += 1
    return n


class TokenizerSpec(Protocol):
    """Contract every tokenizer must honor.

    decode(encode(t)) == t for all valid unicode, and special-token ids never
    collide with ids produced by encode() on plain text.
    """

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: Iterable[int]) -> str: ...

    def special(self, name: str) -> int: ...

    @property
    def vocab_size(self) -> int: ...


DEFAULT_SPECIALS = ("start_of_turn", "end_of_turn", "pad")


class ReferenceTokenizer:
    """Byte-level tokenizer for deterministic, hand-checkable tests.

    Each UTF-8 byte maps to its own id (0-255); special tokens take ids 256,
    257, ... in declaration order. encode() is therefore length-preserving in
    bytes. Not a production tokenizer; production tokenizers plug in through
    TokenizerSpec.
    """

    def __init__(self, specials: Iterable[str] = DEFAULT_SPECIALS):
        self._specials: dict[str, int] = {}
        for name in specials:
            if name in self._specials:
                raise ValueError(f"duplicate special token: {name!r}")
            self._specials[name] = 256 + len(self._specials)
        self._special_ids = set(self._specials.values())

    @property
    def vocab_size(self) -> int:
        return 256 + len(self._specials)

    @property
    def specials(self) -> dict[str, int]:
        return dict(self._specials)

    def special(self, name: str) -> int:
        try:
            return self._specials[name]
        except KeyError:
            raise KeyError(f"special token not registered: {name!r}") from None

    def encode(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def decode(self, ids: Iterable[int]) -> str:
        # Registered special ids are skipped; anything else out of byte range
        # is corruption and raises.
        out = bytearray()
        for i in ids:
            if 0 <= i <= 255:
                out.append(i)
            elif i not in self._special_ids:
                raise ValueError(f"token id {i} is not in the vocabulary")
        return out.decode("utf-8")

    def identity(self) -> dict:
        return {
            "name": "reference",
            "vocab_size": self.vocab_size,
            "specials": dict(self._specials),
        }
