"""Chat-template rendering with per-token training labels.

A rendered turn is laid out as

    [start_of_turn][role name]\n[content][end_of_turn]\n

and labels are the ignore value everywhere except assistant content tokens
and the assistant end-of-turn marker (the model must learn to stop), which
carry their own token ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .corpus import Conversation, Role, TokenizerSpec

IGNORE_LABEL = -100


class NoSupervisedTokensError(ValueError):
    def __init__(self, conv_id: str):
        super().__init__(f"conversation {conv_id!r} has no assistant turns to supervise")
        self.conv_id = conv_id


def _default_role_names() -> dict[Role, str]:
    return {r: r.value for r in Role}


@dataclass(frozen=True)
class ChatTemplate:
    """Names of the special tokens and role spellings used when rendering.

    The special-token names must be registered in the tokenizer in use;
    rendering never emits ids outside {registered specials} ∪ encode(text).
    """

    start_of_turn: str = "start_of_turn"
    end_of_turn: str = "end_of_turn"
    role_names: dict = field(default_factory=_default_role_names)

    def to_dict(self) -> dict:
        return {
            "start_of_turn": self.start_of_turn,
            "end_of_turn": self.end_of_turn,
            "role_names": {r.value: name for r, name in self.role_names.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChatTemplate":
        kwargs: dict = {}
        if "start_of_turn" in d:
            kwargs["start_of_turn"] = d["start_of_turn"]
        if "end_of_turn" in d:
            kwargs["end_of_turn"] = d["end_of_turn"]
        if "role_names" in d:
            kwargs["role_names"] = {Role.parse(k): v for k, v in d["role_names"].items()}
        return cls(**kwargs)


DEFAULT_TEMPLATE = ChatTemplate()


@dataclass(frozen=True)
class RenderedSample:
    tokens: list[int]
    labels: list[int]
    supervised_count: int = -1
    id: str | None = None

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise ValueError("tokens and labels must have equal length")
        for t, l in zip(self.tokens, self.labels):
            if l != IGNORE_LABEL and l != t:
                raise ValueError("each label must be the token id or the ignore value")
        count = sum(1 for l in self.labels if l != IGNORE_LABEL)
        if self.supervised_count == -1:
            object.__setattr__(self, "supervised_count", count)
        elif self.supervised_count != count:
            raise ValueError("supervised_count disagrees with labels")

    def __len__(self) -> int:
        return len(self.tokens)


def render(
    conv: Conversation, template: ChatTemplate, tok: TokenizerSpec
) -> RenderedSample:
    """Render a conversation to token ids plus parallel training labels.

    System, user, and tool turns are fully masked, as are role headers,
    layout newlines, and start-of-turn markers everywhere. Raises
    NoSupervisedTokensError when the conversation has no assistant turn.
    """
    if not any(t.role is Role.ASSISTANT for t in conv.turns):
        raise NoSupervisedTokensError(conv.id)
    sot = tok.special(template.start_of_turn)
    eot = tok.special(template.end_of_turn)
    newline = tok.encode("\n")

    tokens: list[int] = []
    labels: list[int] = []

    def emit(ids: list[int], supervised: bool):
        tokens.extend(ids)
        labels.extend(ids if supervised else [IGNORE_LABEL] * len(ids))

    for turn in conv.turns:
        try:
            role_name = template.role_names[turn.role]
        except KeyError:
            raise ValueError(f"template has no spelling for role {turn.role.value!r}") from None
        supervised = turn.role is Role.ASSISTANT
        emit([sot], False)
        emit(tok.encode(role_name), False)
        emit(newline, False)
        emit(tok.encode(turn.content), supervised)
        emit([eot], supervised)
        emit(newline, False)
    return RenderedSample(tokens=tokens, labels=labels, id=conv.id)


@dataclass(frozen=True)
class TokenSplit:
    input_tokens: int
    output_tokens: int

    @property
    def output_fraction(self) -> float:
        total = self.input_tokens + self.output_tokens
        return self.output_tokens / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "output_fraction": round(self.output_fraction, 4),
        }


def token_split(samples: Iterable[RenderedSample]) -> TokenSplit:
    """Corpus-level split between supervised (output) and masked (input) tokens."""
    inp = out = 0
    for s in samples:
        out += s.supervised_count
        inp += len(s) - s.supervised_count
    return TokenSplit(input_tokens=inp, output_tokens=out)


@dataclass(frozen=True)
class CategoryRow:
    category: str
    tokens: int
    proportion: float


UNCATEGORIZED = "uncategorized"


def category_table(
    corpus: Iterable[tuple[Conversation, RenderedSample]]
) -> list[CategoryRow]:
    """Token totals and proportions per conversation category.

    Tokens count the full rendered length. Proportions are fractions of the
    corpus total and sum to 1 exactly (up to float addition). Rows come out
    sorted by token count descending, ties by name.
    """
    counts: dict[str, int] = {}
    for conv, sample in corpus:
        cat = conv.category if conv.category is not None else UNCATEGORIZED
        counts[cat] = counts.get(cat, 0) + len(sample)
    total = sum(counts.values())
    rows = [
        CategoryRow(cat, n, (n / total) if total else 0.0)
        for cat, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ]
    return rows


def render_stream(
    convs: Iterable[Conversation], template: ChatTemplate, tok: TokenizerSpec
) -> Iterator[tuple[Conversation, RenderedSample]]:
    for conv in convs:
        yield conv, render(conv, template, tok)
