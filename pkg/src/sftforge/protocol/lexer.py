"""Incremental lexer for the restricted tag grammar.

The surface is deliberately *not* XML: no attributes (except the doc-id
carried by citation tags), no self-closing tags, case-sensitive names.
Anything that does not lex as `<NAME>`, `</NAME>`, or `<co: N>` stays
literal text, so prose like "a < b" never breaks a parse.

The lexer is incremental: feed() accepts arbitrary chunk boundaries (even
mid-tag-name) and emits exactly the same token sequence as a single-chunk
parse. Text runs are coalesced up to the next tag or end of input, which is
what makes that invariance hold.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field

_NAME_START = frozenset(string.ascii_letters + "_")
_NAME_CHARS = frozenset(string.ascii_letters + string.digits + "_")
_DIGITS = frozenset("0123456789")
_MAX_NAME = 64
_MAX_WS = 8
_MAX_DIGITS = 10

_CO_RE = re.compile(r"<co:[ \t]{0,8}([0-9]{1,10})>")
_CLOSE_RE = re.compile(r"</([A-Za-z_][A-Za-z0-9_]{0,63})>")
_OPEN_RE = re.compile(r"<([A-Za-z_][A-Za-z0-9_]{0,63})>")


class ProtocolError(ValueError):
    """Base for wire-format parse errors; carries a character offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnbalancedTagError(ProtocolError):
    pass


TEXT = "text"
OPEN = "open"
CLOSE = "close"
INCOMPLETE = "incomplete"  # viable tag prefix cut off by end of input


@dataclass(frozen=True)
class Tok:
    kind: str
    raw: str
    offset: int
    name: str | None = None
    doc_id: int | None = None


def _match_tag(s: str, i: int) -> tuple[Tok, int] | None:
    m = _CO_RE.match(s, i)
    if m:
        return Tok(OPEN, m.group(0), i, name="co", doc_id=int(m.group(1))), m.end()
    m = _CLOSE_RE.match(s, i)
    if m:
        return Tok(CLOSE, m.group(0), i, name=m.group(1)), m.end()
    m = _OPEN_RE.match(s, i)
    if m:
        return Tok(OPEN, m.group(0), i, name=m.group(1)), m.end()
    return None


def _viable_prefix(s: str, i: int) -> bool:
    """Could s[i:], which starts with '<' and reaches the end of the known
    input, still become a complete tag once more text arrives?"""
    n = len(s)
    j = i + 1
    if j >= n:
        return True
    if s[j] == "/":
        j += 1
        if j >= n:
            return True
        return _viable_name(s, j, allow_co=False)
    return _viable_name(s, j, allow_co=True)


def _viable_name(s: str, j: int, allow_co: bool) -> bool:
    n = len(s)
    if s[j] not in _NAME_START:
        return False
    k = j
    while k < n and s[k] in _NAME_CHARS and k - j < _MAX_NAME:
        k += 1
    if k < n and s[k] in _NAME_CHARS:
        return False  # name over the length cap can never match
    if k >= n:
        return True
    c = s[k]
    if c == ">":
        return True
    if allow_co and c == ":" and s[j:k] == "co":
        k += 1
        ws = 0
        while k < n and s[k] in " \t" and ws < _MAX_WS:
            k += 1
            ws += 1
        if k < n and s[k] in " \t":
            return False
        if k >= n:
            return True
        d = 0
        while k < n and s[k] in _DIGITS and d < _MAX_DIGITS:
            k += 1
            d += 1
        if k < n and s[k] in _DIGITS:
            return False
        if k >= n:
            return True
        return s[k] == ">" and d >= 1
    return False


@dataclass
class TagLexer:
    """Single-owner incremental lexer; not shareable mid-stream."""

    _buf: str = ""
    _base: int = 0  # absolute offset of _buf[0]
    _scan: int = 0  # _buf[:_scan] is classified text
    _finished: bool = field(default=False, repr=False)

    def feed(self, chunk: str) -> list[Tok]:
        if self._finished:
            raise RuntimeError("lexer already finished")
        self._buf += chunk
        return self._pump()

    def _pump(self) -> list[Tok]:
        events: list[Tok] = []
        while True:
            i = self._buf.find("<", self._scan)
            if i < 0:
                self._scan = len(self._buf)
                return events
            matched = _match_tag(self._buf, i)
            if matched is not None:
                tok, end = matched
                if i > 0:
                    events.append(Tok(TEXT, self._buf[:i], self._base))
                events.append(
                    Tok(tok.kind, tok.raw, self._base + i, name=tok.name, doc_id=tok.doc_id)
                )
                self._base += end
                self._buf = self._buf[end:]
                self._scan = 0
            elif _viable_prefix(self._buf, i):
                self._scan = i
                return events
            else:
                self._scan = i + 1

    def finish(self) -> list[Tok]:
        if self._finished:
            raise RuntimeError("lexer already finished")
        events = self._pump()
        self._finished = True
        if self._scan < len(self._buf):
            if self._scan > 0:
                events.append(Tok(TEXT, self._buf[: self._scan], self._base))
            events.append(
                Tok(INCOMPLETE, self._buf[self._scan :], self._base + self._scan)
            )
        elif self._buf:
            events.append(Tok(TEXT, self._buf, self._base))
        self._buf = ""
        return events


def lex_text(text: str) -> list[Tok]:
    lexer = TagLexer()
    toks = lexer.feed(text)
    toks.extend(lexer.finish())
    return toks
