"""Seeded synthetic corpora for benchmarks and property suites.

Real SFT corpora mix sample lengths very heterogeneously; a log-normal over
lengths is a reasonable desk-scale stand-in for exercising the packer.
"""

from __future__ import annotations

import math
import random

import numpy as np

from .corpus import Conversation, Role, Turn
from .render import IGNORE_LABEL, RenderedSample

DEFAULT_SEED = 20240801


def lognormal_lengths(
    n: int,
    seed: int = DEFAULT_SEED,
    mean: float = 600.0,
    sigma: float = 1.0,
    capacity: int = 8192,
) -> list[int]:
    """Draw n sample lengths from a log-normal with the given arithmetic
    mean, clipped to [1, capacity]. Deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    mu = math.log(mean) - sigma * sigma / 2.0
    raw = rng.lognormal(mean=mu, sigma=sigma, size=n)
    return [max(1, min(capacity, int(round(x)))) for x in raw]


def sample_of_length(length: int, rng: random.Random) -> RenderedSample:
    """A well-formed rendered sample of exactly `length` tokens: byte-range
    ids with a random supervised suffix (labels echo the token or ignore)."""
    tokens = [rng.randrange(0, 256) for _ in range(length)]
    supervised_from = rng.randrange(0, length)
    labels = [
        tokens[i] if i >= supervised_from else IGNORE_LABEL for i in range(length)
    ]
    return RenderedSample(tokens=tokens, labels=labels)


def synthetic_samples(lengths: list[int], seed: int = DEFAULT_SEED) -> list[RenderedSample]:
    rng = random.Random(seed)
    return [sample_of_length(n, rng) for n in lengths]


_WORDS = (
    "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo lima "
    "mike november oscar papa quebec romeo sierra tango uniform victor whiskey"
).split()


def random_text(rng: random.Random, min_words: int = 1, max_words: int = 12) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(rng.randint(min_words, max_words)))


def random_conversation(rng: random.Random, ident: str) -> Conversation:
    """A structurally valid conversation: optional system turn, then strict
    user/assistant alternation with occasional tool turns, assistant last."""
    turns: list[Turn] = []
    if rng.random() < 0.3:
        turns.append(Turn(Role.SYSTEM, random_text(rng)))
    for _ in range(rng.randint(1, 4)):
        turns.append(Turn(Role.USER, random_text(rng)))
        turns.append(Turn(Role.ASSISTANT, random_text(rng)))
        if rng.random() < 0.25:
            turns.append(Turn(Role.TOOL, '{"result": %d}' % rng.randint(0, 99)))
            turns.append(Turn(Role.ASSISTANT, random_text(rng)))
    return Conversation(
        id=ident,
        turns=tuple(turns),
        source_model=rng.choice(("m-large", "m-small", None)),
        category=rng.choice(("Math", "Coding", "General Instructions", None)),
    )


def random_conversations(n: int, seed: int = DEFAULT_SEED) -> list[Conversation]:
    rng = random.Random(seed)
    return [random_conversation(rng, f"synth-{i}") for i in range(n)]
