"""Tool definitions, calls, and responses on the tag wire format.

Definitions travel as JSON schemas inside one <tools> block; invocations and
results travel one JSON payload per <tool_call> / <tool_response> element.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .lexer import CLOSE, INCOMPLETE, OPEN, ProtocolError, Tok, UnbalancedTagError, lex_text


class MalformedPayloadError(ProtocolError):
    pass


class DuplicateToolError(ValueError):
    def __init__(self, name: str):
        super().__init__(f"duplicate tool name: {name!r}")
        self.name = name


@dataclass(frozen=True)
class ToolDefinition:
    name: str
    schema: dict
    description: str | None = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("tool name must be non-empty")
        if not isinstance(self.schema, dict):
            raise ValueError("tool schema must be an object")

    def to_payload(self) -> dict:
        payload: dict = {"name": self.name}
        if self.description is not None:
            payload["description"] = self.description
        payload["parameters"] = self.schema
        return payload

    @classmethod
    def from_payload(cls, payload: Any, offset: int = 0) -> "ToolDefinition":
        if not isinstance(payload, dict) or not isinstance(payload.get("name"), str):
            raise MalformedPayloadError("tool definition needs a string 'name'", offset)
        if not isinstance(payload.get("parameters"), dict):
            raise MalformedPayloadError("tool definition needs object 'parameters'", offset)
        desc = payload.get("description")
        if desc is not None and not isinstance(desc, str):
            raise MalformedPayloadError("tool description must be a string", offset)
        return cls(name=payload["name"], schema=payload["parameters"], description=desc)


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: Any

    def to_payload(self) -> dict:
        return {"name": self.name, "arguments": self.arguments}


def _collect_elements(toks: list[Tok], tag: str) -> list[tuple[int, str]]:
    """Return (open offset, raw body) for each balanced `tag` element.

    The first matching close tag terminates a body; any markup between open
    and close is kept verbatim in the body text.
    """
    elements: list[tuple[int, str]] = []
    open_offset: int | None = None
    body: list[str] = []
    for tok in toks:
        if open_offset is None:
            if tok.kind == OPEN and tok.name == tag:
                open_offset = tok.offset
                body = []
            elif tok.kind == CLOSE and tok.name == tag:
                raise UnbalancedTagError(f"</{tag}> without opening tag", tok.offset)
        else:
            if tok.kind == CLOSE and tok.name == tag:
                elements.append((open_offset, "".join(body)))
                open_offset = None
            else:
                body.append(tok.raw)
    if open_offset is not None:
        raise UnbalancedTagError(f"<{tag}> is never closed", open_offset)
    return elements


def _parse_body_json(body: str, offset: int, what: str) -> Any:
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        raise MalformedPayloadError(f"{what} body is not valid JSON: {exc.msg}", offset) from None


def parse_tool_calls(text: str) -> list[ToolCall]:
    """Extract every <tool_call> payload, in document order.

    Prose around the elements is ignored. An unclosed element raises
    UnbalancedTagError at the opening tag's offset; a body that is not a
    JSON object carrying name/arguments raises MalformedPayloadError.
    """
    calls = []
    for offset, body in _collect_elements(lex_text(text), "tool_call"):
        payload = _parse_body_json(body, offset, "tool_call")
        if not isinstance(payload, dict) or not isinstance(payload.get("name"), str):
            raise MalformedPayloadError("tool_call needs a string 'name'", offset)
        if "arguments" not in payload:
            raise MalformedPayloadError("tool_call needs 'arguments'", offset)
        calls.append(ToolCall(name=payload["name"], arguments=payload["arguments"]))
    return calls


def parse_tool_responses(text: str) -> list[Any]:
    """Extract <tool_response> payloads; objects and arrays are both accepted."""
    out = []
    for offset, body in _collect_elements(lex_text(text), "tool_response"):
        payload = _parse_body_json(body, offset, "tool_response")
        if not isinstance(payload, (dict, list)):
            raise MalformedPayloadError("tool_response must be an object or array", offset)
        out.append(payload)
    return out


def emit_tool_call(call: ToolCall) -> str:
    return f"<tool_call>{json.dumps(call.to_payload(), ensure_ascii=False)}</tool_call>"


def emit_tools_block(defs: list[ToolDefinition]) -> str:
    """Serialize definitions into one <tools> block (empty list => []).

    Round trip guarantee: parse_tools_block(emit_tools_block(defs)) == defs.
    """
    seen = set()
    for d in defs:
        if d.name in seen:
            raise DuplicateToolError(d.name)
        seen.add(d.name)
    body = json.dumps([d.to_payload() for d in defs], ensure_ascii=False)
    return f"<tools>{body}</tools>"


def parse_tools_block(text: str) -> list[ToolDefinition]:
    elements = _collect_elements(lex_text(text), "tools")
    defs: list[ToolDefinition] = []
    for offset, body in elements:
        payload = _parse_body_json(body, offset, "tools")
        if not isinstance(payload, list):
            raise MalformedPayloadError("tools block must hold an array", offset)
        for item in payload:
            defs.append(ToolDefinition.from_payload(item, offset))
    seen = set()
    for d in defs:
        if d.name in seen:
            raise DuplicateToolError(d.name)
        seen.add(d.name)
    return defs
