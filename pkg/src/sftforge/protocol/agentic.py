"""Error-tolerant parser for the structured-reasoning tag schema.

Model output is best effort: schema violations become diagnostics on the
parsed tree rather than exceptions, so downstream consumers always get the
partial structure that was actually present.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .lexer import CLOSE, INCOMPLETE, OPEN, TEXT, Tok, lex_text

ROOT = ""  # name of the synthetic document root


class DiagnosticKind(enum.Enum):
    UNKNOWN_TAG = "UnknownTag"
    INDEX_GAP = "IndexGap"
    MISSING_SECTION = "MissingSection"
    UNBALANCED_TAG = "UnbalancedTag"
    MISPLACED_SECTION = "MisplacedSection"


@dataclass(frozen=True)
class Diagnostic:
    kind: DiagnosticKind
    tag: str
    message: str
    offset: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "tag": self.tag,
            "message": self.message,
            "offset": self.offset,
        }


@dataclass
class TagNode:
    name: str
    offset: int
    index: int | None = None   # parsed N for indexed families like THOUGHT_N
    family: str | None = None
    children: list["TagNode"] = field(default_factory=list)
    texts: list[str] = field(default_factory=list)

    def find_all(self, name: str) -> list["TagNode"]:
        found = [c for c in self.children if c.name == name]
        for c in self.children:
            found.extend(c.find_all(name))
        return found

    def to_dict(self) -> dict:
        d: dict = {"name": self.name}
        if self.index is not None:
            d["index"] = self.index
        if self.texts:
            d["texts"] = list(self.texts)
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d


@dataclass(frozen=True)
class TagTree:
    root: TagNode
    diagnostics: list[Diagnostic]

    @property
    def clean(self) -> bool:
        return not self.diagnostics

    def to_dict(self) -> dict:
        return {
            "tree": self.root.to_dict(),
            "diagnostics": [d.to_dict() for d in self.diagnostics],
        }


@dataclass(frozen=True)
class AgenticSchema:
    """Expected document structure plus the reserved-token registry.

    ``sections`` maps each structural section to its required parent (ROOT
    for top-level sections); ``indexed_families`` maps a family prefix to
    the section its numbered members must live in. ``extra_tags`` are
    registry members with no placement constraint.
    """

    sections: dict = field(
        default_factory=lambda: {
            "SCRATCHPAD": ROOT,
            "RESTATEMENT": "SCRATCHPAD",
            "REASONING": "SCRATCHPAD",
            "PLAN": "SCRATCHPAD",
            "PYDANTIC_SCHEMAS": "SCRATCHPAD",
            "DIAGRAM": "SCRATCHPAD",
            "REFLECTION": "SCRATCHPAD",
            "SOLUTION": ROOT,
            "EXPLANATION": ROOT,
            "UNIT_TEST": ROOT,
        }
    )
    indexed_families: dict = field(
        default_factory=lambda: {
            "THOUGHT": "REASONING",
            "STEP": "PLAN",
            "SCHEMA": "PYDANTIC_SCHEMAS",
        }
    )
    extra_tags: frozenset = frozenset({"INNER_MONOLOGUE", "EXECUTION", "THINKING"})

    @property
    def required_sections(self) -> tuple[str, ...]:
        return tuple(self.sections)

    @property
    def reserved_tokens(self) -> frozenset:
        """The flat tag-token registry (structural helpers excluded)."""
        return frozenset(
            {
                "SCRATCHPAD",
                "REASONING",
                "INNER_MONOLOGUE",
                "PLAN",
                "EXECUTION",
                "REFLECTION",
                "THINKING",
                "SOLUTION",
                "EXPLANATION",
                "UNIT_TEST",
            }
        )

    def split_family(self, name: str) -> tuple[str, int] | None:
        m = re.fullmatch(r"([A-Z][A-Z_]*)_([0-9]+)", name)
        if m and m.group(1) in self.indexed_families:
            return m.group(1), int(m.group(2))
        return None

    def is_known(self, name: str) -> bool:
        return (
            name in self.sections
            or name in self.extra_tags
            or self.split_family(name) is not None
        )


DEFAULT_AGENTIC_SCHEMA = AgenticSchema()


def parse_agentic(text: str, schema: AgenticSchema = DEFAULT_AGENTIC_SCHEMA) -> TagTree:
    """Build a tag tree and validate it against the schema.

    Parsing never raises on schema violations: unknown tags stay in the tree
    with an UnknownTag diagnostic, stray closes get UnbalancedTag, misplaced
    and missing sections and index gaps/duplicates are reported likewise.
    Elements still open at end of input are closed silently, so a truncated
    document prefix parses without spurious diagnostics.
    """
    root = TagNode(name=ROOT, offset=0)
    stack = [root]
    diagnostics: list[Diagnostic] = []

    for tok in lex_text(text):
        if tok.kind == TEXT:
            stack[-1].texts.append(tok.raw)
        elif tok.kind == INCOMPLETE:
            stack[-1].texts.append(tok.raw)
        elif tok.kind == OPEN:
            fam = schema.split_family(tok.name)
            node = TagNode(
                name=tok.name,
                offset=tok.offset,
                family=fam[0] if fam else None,
                index=fam[1] if fam else None,
            )
            if not schema.is_known(tok.name):
                diagnostics.append(
                    Diagnostic(
                        DiagnosticKind.UNKNOWN_TAG,
                        tok.name,
                        f"tag <{tok.name}> is not in the registry",
                        tok.offset,
                    )
                )
            stack[-1].children.append(node)
            stack.append(node)
        elif tok.kind == CLOSE:
            names_on_stack = [n.name for n in stack[1:]]
            if tok.name not in names_on_stack:
                diagnostics.append(
                    Diagnostic(
                        DiagnosticKind.UNBALANCED_TAG,
                        tok.name,
                        f"</{tok.name}> has no matching open tag",
                        tok.offset,
                    )
                )
                continue
            while stack[-1].name != tok.name:
                abandoned = stack.pop()
                diagnostics.append(
                    Diagnostic(
                        DiagnosticKind.UNBALANCED_TAG,
                        abandoned.name,
                        f"<{abandoned.name}> implicitly closed by </{tok.name}>",
                        tok.offset,
                    )
                )
            stack.pop()
    # anything still open at end of input is a legitimate prefix: close silently

    diagnostics.extend(_validate(root, schema, end_offset=len(text)))
    diagnostics.sort(key=lambda d: d.offset)
    return TagTree(root=root, diagnostics=diagnostics)


def _validate(root: TagNode, schema: AgenticSchema, end_offset: int) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    present: set[str] = set()

    def walk(node: TagNode):
        for child in node.children:
            present.add(child.name)
            _check_placement(child, node.name)
            walk(child)

    def _check_placement(child: TagNode, parent_name: str):
        if child.family is not None:
            want = schema.indexed_families[child.family]
            if parent_name != want:
                out.append(
                    Diagnostic(
                        DiagnosticKind.MISPLACED_SECTION,
                        child.name,
                        f"<{child.name}> belongs inside <{want}>",
                        child.offset,
                    )
                )
        elif child.name in schema.sections:
            want = schema.sections[child.name]
            if parent_name != want:
                where = f"<{want}>" if want else "the document root"
                out.append(
                    Diagnostic(
                        DiagnosticKind.MISPLACED_SECTION,
                        child.name,
                        f"<{child.name}> belongs at {where}",
                        child.offset,
                    )
                )

    walk(root)

    def walk_indices(node: TagNode):
        by_family: dict[str, list[TagNode]] = {}
        for child in node.children:
            if child.family is not None:
                by_family.setdefault(child.family, []).append(child)
            walk_indices(child)
        for family, members in by_family.items():
            expected = 1
            for member in members:
                idx = member.index
                if idx == expected:
                    expected += 1
                elif idx < expected:
                    out.append(
                        Diagnostic(
                            DiagnosticKind.INDEX_GAP,
                            member.name,
                            f"{family}_{idx} repeats or regresses an index",
                            member.offset,
                        )
                    )
                else:
                    missing = ", ".join(
                        f"{family}_{k}" for k in range(expected, idx)
                    )
                    out.append(
                        Diagnostic(
                            DiagnosticKind.INDEX_GAP,
                            member.name,
                            f"missing {missing}",
                            member.offset,
                        )
                    )
                    expected = idx + 1

    walk_indices(root)

    for name in schema.required_sections:
        if name not in present:
            out.append(
                Diagnostic(
                    DiagnosticKind.MISSING_SECTION,
                    name,
                    f"required section <{name}> is absent",
                    end_offset,
                )
            )
    return out
