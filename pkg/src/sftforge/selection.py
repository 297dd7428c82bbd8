"""Benchmark-normalized checkpoint selection.

Each benchmark suite's scores are min-max rescaled to [0, 100] across the
epochs, the rescaled values are averaged per epoch, and the epoch with the
highest average wins. Display values are floored integers and totals are
truncated to two decimals, matching how such score grids are usually
printed; neither affects which values feed the average.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class ScoreMatrix:
    suites: list[str]
    epochs: list[str]
    scores: list[list[float]]  # suites x epochs

    def __post_init__(self):
        if not self.suites:
            raise ValueError("need at least one suite")
        if len(self.epochs) < 2:
            raise ValueError("need at least two epochs to normalize across")
        if len(self.scores) != len(self.suites):
            raise ValueError("scores must have one row per suite")
        if any(len(row) != len(self.epochs) for row in self.scores):
            raise ValueError("score grid must be rectangular")

    @classmethod
    def from_csv(cls, text: str) -> "ScoreMatrix":
        """Rows are suites, columns are epochs; the header row carries the
        epoch labels (its first cell is a corner label and is ignored)."""
        rows = [r for r in csv.reader(text.splitlines()) if r]
        if len(rows) < 2:
            raise ValueError("CSV needs a header row and at least one suite row")
        epochs = [c.strip() for c in rows[0][1:]]
        suites, scores = [], []
        for row in rows[1:]:
            suites.append(row[0].strip())
            scores.append([float(c) for c in row[1:]])
        return cls(suites=suites, epochs=epochs, scores=scores)

    @classmethod
    def from_json(cls, text: str) -> "ScoreMatrix":
        d = json.loads(text)
        return cls(
            suites=list(d["suites"]),
            epochs=[str(e) for e in d["epochs"]],
            scores=[[float(x) for x in row] for row in d["scores"]],
        )


def minmax_normalize(row: Sequence[float]) -> list[float]:
    """Rescale to [0, 100] via (x - min) / (max - min).

    A constant row is degenerate (no spread to rank by) and maps to all
    zeros, which is neutral under argmax.
    """
    if not row:
        raise ValueError("row must be non-empty")
    lo, hi = min(row), max(row)
    if hi == lo:
        return [0.0] * len(row)
    return [100.0 * (x - lo) / (hi - lo) for x in row]


def suite_mean(sub_scores: Sequence[float]) -> float:
    if not sub_scores:
        raise ValueError("sub_scores must be non-empty")
    return sum(sub_scores) / len(sub_scores)


def _truncate2(x: float) -> float:
    return math.trunc(x * 100) / 100


def total_scores(matrix: ScoreMatrix) -> list[float]:
    """Per-epoch mean of the normalized (unfloored) suite values, truncated
    toward zero to two decimals for reporting."""
    normalized = [minmax_normalize(row) for row in matrix.scores]
    n = len(matrix.suites)
    return [
        _truncate2(sum(norm[e] for norm in normalized) / n)
        for e in range(len(matrix.epochs))
    ]


@dataclass(frozen=True)
class SelectionResult:
    suites: list[str]
    epochs: list[str]
    normalized: list[list[float]]          # suites x epochs, full precision
    display_normalized: list[list[int]]    # floored for display
    totals: list[float]                    # per-epoch, truncated to 2 decimals
    selected_epoch: str

    def to_dict(self) -> dict:
        return {
            "suites": self.suites,
            "epochs": self.epochs,
            "normalized": [[round(v, 6) for v in row] for row in self.normalized],
            "display_normalized": self.display_normalized,
            "totals": self.totals,
            "selected_epoch": self.selected_epoch,
        }


def select_checkpoint(matrix: ScoreMatrix) -> SelectionResult:
    """Pick the epoch with the highest mean normalized score.

    Ties resolve to the earliest epoch. Flooring and truncation are display
    concerns; the floored grid never feeds the totals.
    """
    normalized = [minmax_normalize(row) for row in matrix.scores]
    display = [[math.floor(v) for v in row] for row in normalized]
    totals = total_scores(matrix)
    best = max(range(len(totals)), key=lambda e: (totals[e], -e))
    return SelectionResult(
        suites=list(matrix.suites),
        epochs=list(matrix.epochs),
        normalized=normalized,
        display_normalized=display,
        totals=totals,
        selected_epoch=matrix.epochs[best],
    )
