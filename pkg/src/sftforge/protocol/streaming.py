"""Incremental consumption of model output as a typed event stream.

Events depend only on the concatenated document, never on how it was
chunked: feeding one chunk or one character at a time yields the identical
sequence. Errors surface as a terminal StreamError event rather than an
exception so a consumer loop stays simple.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from .citations import NestedCitationError
from .lexer import (
    CLOSE,
    INCOMPLETE,
    OPEN,
    TEXT,
    ProtocolError,
    TagLexer,
    Tok,
    UnbalancedTagError,
)
from .tools import MalformedPayloadError, ToolCall


@dataclass(frozen=True)
class TagOpen:
    name: str
    offset: int
    doc_id: int | None = None


@dataclass(frozen=True)
class TagClose:
    name: str
    offset: int


@dataclass(frozen=True)
class Text:
    text: str
    offset: int


@dataclass(frozen=True)
class ToolCallComplete:
    call: ToolCall
    offset: int  # offset of the opening tag


@dataclass(frozen=True)
class CitationComplete:
    doc_id: int
    text: str
    offset: int


@dataclass(frozen=True)
class StreamError:
    kind: str
    message: str
    offset: int


Event = Any  # union of the event dataclasses above


class _WireTracker:
    """Synthesizes ToolCallComplete / CitationComplete on top of raw tokens."""

    def __init__(self):
        self._tool_open: int | None = None
        self._tool_body: list[str] = []
        self._cite_open: tuple[int, int] | None = None  # (doc_id, offset)
        self._cite_body: list[str] = []

    def on_tok(self, tok: Tok) -> Iterator[Event]:
        if tok.kind == INCOMPLETE:
            raise UnbalancedTagError("input ended inside a tag", tok.offset)

        if tok.kind == TEXT:
            yield Text(tok.raw, tok.offset)
        elif tok.kind == OPEN:
            yield TagOpen(tok.name, tok.offset, doc_id=tok.doc_id)
        else:
            yield TagClose(tok.name, tok.offset)

        opened_tool = tok.kind == OPEN and tok.name == "tool_call"
        closed_tool = tok.kind == CLOSE and tok.name == "tool_call"
        opened_cite = tok.kind == OPEN and tok.name == "co" and tok.doc_id is not None
        closed_cite = tok.kind == CLOSE and tok.name == "co"

        # Each open body captures every token's raw text except its own
        # delimiters; overlapping captures proceed independently.
        if self._tool_open is not None:
            if closed_tool:
                body = "".join(self._tool_body)
                offset = self._tool_open
                self._tool_open = None
                yield ToolCallComplete(_parse_call(body, offset), offset)
            else:
                self._tool_body.append(tok.raw)
        elif opened_tool:
            self._tool_open = tok.offset
            self._tool_body = []

        if self._cite_open is not None:
            if closed_cite:
                doc_id, offset = self._cite_open
                self._cite_open = None
                yield CitationComplete(doc_id, "".join(self._cite_body), offset)
            elif opened_cite:
                raise NestedCitationError("citation tags may not nest", tok.offset)
            else:
                self._cite_body.append(tok.raw)
        elif opened_cite:
            self._cite_open = (tok.doc_id, tok.offset)
            self._cite_body = []

    def on_end(self):
        if self._tool_open is not None:
            raise UnbalancedTagError("<tool_call> is never closed", self._tool_open)
        if self._cite_open is not None:
            raise UnbalancedTagError("citation is never closed", self._cite_open[1])


def _parse_call(body: str, offset: int) -> ToolCall:
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as exc:
        raise MalformedPayloadError(f"tool_call body is not valid JSON: {exc.msg}", offset) from None
    if not isinstance(payload, dict) or not isinstance(payload.get("name"), str):
        raise MalformedPayloadError("tool_call needs a string 'name'", offset)
    if "arguments" not in payload:
        raise MalformedPayloadError("tool_call needs 'arguments'", offset)
    return ToolCall(name=payload["name"], arguments=payload["arguments"])


def stream_events(chunks: Iterable[str]) -> Iterator[Event]:
    """Parse incrementally delivered text into wire events.

    The generator is single-owner; a parse error ends the stream with one
    StreamError event.
    """
    lexer = TagLexer()
    tracker = _WireTracker()
    try:
        for chunk in chunks:
            for tok in lexer.feed(chunk):
                yield from tracker.on_tok(tok)
        for tok in lexer.finish():
            yield from tracker.on_tok(tok)
        tracker.on_end()
    except ProtocolError as exc:
        yield StreamError(kind=type(exc).__name__, message=str(exc), offset=exc.offset)
