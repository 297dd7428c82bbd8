"""Structured-output wire formats: tool calls, citations, agentic tags."""

from .agentic import (
    DEFAULT_AGENTIC_SCHEMA,
    AgenticSchema,
    Diagnostic,
    DiagnosticKind,
    TagNode,
    TagTree,
    parse_agentic,
)
from .citations import CitationSpan, NestedCitationError, emit_citation, extract_citations
from .lexer import ProtocolError, TagLexer, Tok, UnbalancedTagError, lex_text
from .streaming import (
    CitationComplete,
    StreamError,
    TagClose,
    TagOpen,
    Text,
    ToolCallComplete,
    stream_events,
)
from .tools import (
    DuplicateToolError,
    MalformedPayloadError,
    ToolCall,
    ToolDefinition,
    emit_tool_call,
    emit_tools_block,
    parse_tool_calls,
    parse_tool_responses,
    parse_tools_block,
)

__all__ = [
    "DEFAULT_AGENTIC_SCHEMA",
    "AgenticSchema",
    "CitationComplete",
    "CitationSpan",
    "Diagnostic",
    "DiagnosticKind",
    "DuplicateToolError",
    "MalformedPayloadError",
    "NestedCitationError",
    "ProtocolError",
    "StreamError",
    "TagClose",
    "TagLexer",
    "TagNode",
    "TagOpen",
    "TagTree",
    "Text",
    "Tok",
    "ToolCall",
    "ToolCallComplete",
    "ToolDefinition",
    "UnbalancedTagError",
    "emit_citation",
    "emit_tool_call",
    "emit_tools_block",
    "extract_citations",
    "lex_text",
    "parse_agentic",
    "parse_tool_calls",
    "parse_tool_responses",
    "parse_tools_block",
    "stream_events",
]
