"""Citation spans: `<co: N>...</co>` grounding markers in generated text."""

from __future__ import annotations

from dataclasses import dataclass

from .lexer import CLOSE, INCOMPLETE, OPEN, ProtocolError, UnbalancedTagError, lex_text


class NestedCitationError(ProtocolError):
    pass


@dataclass(frozen=True)
class CitationSpan:
    doc_id: int
    start: int  # offsets into the cleaned text
    end: int
    text: str

    def __post_init__(self):
        if self.doc_id < 0:
            raise ValueError("doc_id must be nonnegative")
        if not (0 <= self.start < self.end):
            raise ValueError("span must satisfy 0 <= start < end")


def extract_citations(text: str) -> tuple[str, list[CitationSpan], list[int]]:
    """Strip citation tags and report what they covered.

    Returns (clean_text, spans, cited_ids). Only citation tags are removed;
    every other character (including unrelated markup) passes through
    untouched, and span offsets index into the cleaned text. cited_ids lists
    distinct doc ids in first-appearance order; a citation with an empty body
    still contributes its id but produces no span.

    Citations may not nest, and every opened citation must close.
    """
    parts: list[str] = []
    clean_len = 0
    raw_spans: list[tuple[int, int, int]] = []
    cited: list[int] = []
    open_citation: tuple[int, int, int] | None = None  # (doc_id, clean_start, src_offset)

    for tok in lex_text(text):
        if tok.kind == OPEN and tok.name == "co" and tok.doc_id is not None:
            if open_citation is not None:
                raise NestedCitationError("citation tags may not nest", tok.offset)
            open_citation = (tok.doc_id, clean_len, tok.offset)
            if tok.doc_id not in cited:
                cited.append(tok.doc_id)
        elif tok.kind == CLOSE and tok.name == "co":
            if open_citation is None:
                raise UnbalancedTagError("</co> without opening citation", tok.offset)
            doc_id, start, _ = open_citation
            if clean_len > start:
                raw_spans.append((doc_id, start, clean_len))
            open_citation = None
        elif tok.kind == INCOMPLETE and open_citation is not None:
            raise UnbalancedTagError("citation is never closed", open_citation[2])
        else:
            # plain text and non-citation markup stay verbatim
            parts.append(tok.raw)
            clean_len += len(tok.raw)

    if open_citation is not None:
        raise UnbalancedTagError("citation is never closed", open_citation[2])

    clean_text = "".join(parts)
    spans = [
        CitationSpan(doc_id, start, end, clean_text[start:end])
        for doc_id, start, end in raw_spans
    ]
    return clean_text, spans, cited


def emit_citation(doc_id: int, text: str) -> str:
    if doc_id < 0:
        raise ValueError("doc_id must be nonnegative")
    return f"<co:{doc_id}>{text}</co>"
