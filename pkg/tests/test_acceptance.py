"""Acceptance suite: the shipping criteria for this toolkit.

Each test exercises one criterion end to end at its stated tolerance and
prints a single pass/fail line (run with `pytest -s tests/test_acceptance.py`
to see them live).
"""

from __future__ import annotations

import functools
import json
import math
import random
import time

import pytest

from sftforge.corpus import Conversation, ReferenceTokenizer, Role, Turn
from sftforge.packing import Strategy, efficiency, pack, plan_packing, unpack
from sftforge.protocol import (
    DiagnosticKind,
    StreamError,
    extract_citations,
    parse_agentic,
    stream_events,
)
from sftforge.render import DEFAULT_TEMPLATE, IGNORE_LABEL, render, token_split
from sftforge.selection import ScoreMatrix, select_checkpoint
from sftforge.synth import lognormal_lengths, random_conversation, sample_of_length
from sftforge.cli import main

TOK = ReferenceTokenizer()


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException:
                print(f"[ACCEPTANCE] {name}: FAIL", flush=True)
                raise
            suffix = f" ({detail})" if isinstance(detail, str) else ""
            print(f"[ACCEPTANCE] {name}: PASS{suffix}", flush=True)

        return run

    return wrap


@criterion("packing fixture (12 segments, capacity 64)")
def test_packing_fixture():
    lengths = [11, 6, 7, 4, 8, 4, 3, 4, 3, 3, 5, 3]
    start = time.perf_counter()
    rng = random.Random(0)
    samples = [sample_of_length(n, rng) for n in lengths]
    batch = pack(samples, 64, Strategy.CONTIGUOUS, TOK)
    report = efficiency(batch)
    elapsed = time.perf_counter() - start
    assert report.real_tokens == 61
    assert report.pad_tokens == 3
    assert report.efficiency == 0.9531
    assert batch.buffers[0].cu_seqlens == [
        0, 11, 17, 24, 28, 36, 40, 43, 47, 50, 53, 58, 61, 64,
    ]
    assert elapsed < 1.0
    return f"eff={report.efficiency}, {elapsed * 1000:.0f} ms"


@criterion("epoch selection oracle (4 suites x 4 epochs)")
def test_selection_oracle():
    start = time.perf_counter()
    matrix = ScoreMatrix(
        suites=["GPT4All", "AGIEval", "IFEval", "MT-Bench"],
        epochs=["1", "2", "3", "4"],
        scores=[
            [76.85, 76.70, 76.59, 73.63],
            [54.21, 56.10, 55.99, 54.00],
            [76.52, 78.92, 81.33, 86.61],
            [8.37, 8.59, 8.99, 8.67],
        ],
    )
    result = select_checkpoint(matrix)
    elapsed = time.perf_counter() - start
    assert result.display_normalized == [
        [100, 95, 91, 0],
        [10, 100, 94, 0],
        [0, 23, 47, 100],
        [0, 35, 100, 48],
    ]
    assert result.totals[0] == pytest.approx(27.50, abs=0.01)
    assert result.totals[3] == pytest.approx(37.09, abs=0.01)
    assert result.totals[1] == pytest.approx(63.65, abs=0.01)
    # score grids often print totals computed from higher-precision
    # internals; recomputing from the printed rows lands near 83.89, not on it
    assert result.totals[2] == pytest.approx(83.89, abs=0.35)
    assert result.selected_epoch == "3"
    assert elapsed < 1.0
    return f"selected epoch {result.selected_epoch}, totals {result.totals}"


@criterion("synthetic-corpus packing efficiency >= 0.96")
def test_packing_efficiency_target():
    start = time.perf_counter()
    lengths = lognormal_lengths(5000, seed=20240801, mean=600.0, capacity=8192)
    assert len(lengths) >= 5000
    ffd = plan_packing(lengths, 8192, Strategy.FIRST_FIT_DECREASING)
    ff = plan_packing(lengths, 8192, Strategy.FIRST_FIT)
    total = sum(lengths)
    eff_ffd = total / (ffd.n_buffers * 8192)
    eff_ff = total / (ff.n_buffers * 8192)
    elapsed = time.perf_counter() - start
    assert eff_ffd >= 0.96
    assert elapsed < 30.0
    return (
        f"first_fit_decreasing={eff_ffd:.4f}, first_fit={eff_ff:.4f}, "
        f"{elapsed:.1f} s"
    )


def _min_bins_oracle(lengths, capacity):
    best = len(lengths)
    lengths = sorted(lengths, reverse=True)

    def place(i, bins):
        nonlocal best
        if len(bins) >= best:
            return
        if i == len(lengths):
            best = len(bins)
            return
        seen = set()
        for b in range(len(bins)):
            if bins[b] >= lengths[i] and bins[b] not in seen:
                seen.add(bins[b])
                bins[b] -= lengths[i]
                place(i + 1, bins)
                bins[b] += lengths[i]
        bins.append(capacity - lengths[i])
        place(i + 1, bins)
        bins.pop()

    if lengths:
        place(0, [])
    return best


@criterion("bin-packing quality and round trip")
def test_bin_packing_oracle():
    rng = random.Random(0xBEEF)
    trials = 0
    for _ in range(1000):
        n = rng.randint(1, 8)
        capacity = rng.randint(4, 48)
        lengths = [rng.randint(1, capacity) for _ in range(n)]
        ffd = plan_packing(lengths, capacity, Strategy.FIRST_FIT_DECREASING)
        opt = _min_bins_oracle(lengths, capacity)
        assert ffd.n_buffers <= (11 / 9) * opt + 1
        trials += 1
    assert trials >= 1000

    round_trips = 0
    for _ in range(10_000):
        k = rng.randint(0, 6)
        samples = [sample_of_length(rng.randint(1, 32), rng) for _ in range(k)]
        strategy = rng.choice(list(Strategy))
        batch = pack(samples, 32, strategy, TOK, pad_as_segment=rng.random() < 0.5)
        got = sorted((tuple(t), tuple(l)) for t, l in unpack(batch))
        want = sorted((tuple(s.tokens), tuple(s.labels)) for s in samples)
        assert got == want
        round_trips += 1
    assert round_trips >= 10_000
    return f"{trials} FFD-vs-oracle trials, {round_trips} round trips"


@criterion("masking property suite")
def test_masking_properties():
    end_of_turn = TOK.special(DEFAULT_TEMPLATE.end_of_turn)
    rng = random.Random(101)
    checked = 0
    for i in range(1000):
        conv = random_conversation(rng, f"mask-{i}")
        sample = render(conv, DEFAULT_TEMPLATE, TOK)

        supervised = [t for t, l in zip(sample.tokens, sample.labels) if l != IGNORE_LABEL]
        decoded = TOK.decode([t for t in supervised if t != end_of_turn])
        expected = "".join(t.content for t in conv.turns if t.role is Role.ASSISTANT)
        assert decoded == expected

        # independently reconstruct per-turn spans and demand no supervision
        # outside assistant turns
        offset = 0
        for turn in conv.turns:
            role_name = DEFAULT_TEMPLATE.role_names[turn.role]
            span = 1 + len(role_name.encode()) + 1 + len(turn.content.encode()) + 1 + 1
            if turn.role is not Role.ASSISTANT:
                assert all(
                    l == IGNORE_LABEL for l in sample.labels[offset : offset + span]
                )
            offset += span
        assert offset == len(sample)
        checked += 1

    split = token_split(
        [render(
            Conversation(id="hand", turns=(Turn(Role.USER, "Hi"), Turn(Role.ASSISTANT, "Yo"))),
            DEFAULT_TEMPLATE,
            TOK,
        )]
    )
    assert (split.input_tokens, split.output_tokens) == (22, 3)
    assert split.output_fraction == pytest.approx(0.12)
    return f"{checked} fuzzed conversations, split (22, 3, 0.12)"


# category name -> (printed proportion to reproduce, rendered-token target)
CATEGORY_TARGETS = [
    ("General Instructions", 60.6, 605),
    ("Domain Expert", 12.8, 127),
    ("Math", 6.7, 66),
    ("Roleplaying", 6.1, 60),
    ("Coding", 4.5, 44),
    ("Tool Use, Agentic, and RAG", 4.3, 43),
    ("Content Generation", 3.0, 30),
    ("Steering and Alignment", 2.5, 25),
]


@criterion("category proportion table within 0.2 points per row")
def test_category_proportions(tmp_path, capsys):
    # a [user, assistant] pair renders to 21 + len(user) + len(assistant)
    # bytes, so content lengths are chosen to hit each target exactly
    records = []
    for name, _, target in CATEGORY_TARGETS:
        records.append(
            {
                "id": f"cat-{name}",
                "category": name,
                "messages": [
                    {"role": "user", "content": "x"},
                    {"role": "assistant", "content": "y" * (target - 22)},
                ],
            }
        )
    infile = tmp_path / "categories.jsonl"
    infile.write_text("\n".join(json.dumps(r) for r in records) + "\n")

    assert main(["stats", "--in", str(infile)]) == 0
    payload = json.loads(capsys.readouterr().out)
    got = {c["category"]: c for c in payload["categories"]}
    deltas = []
    for name, printed, target in CATEGORY_TARGETS:
        assert got[name]["tokens"] == target
        delta = abs(got[name]["proportion_pct"] - printed)
        assert delta <= 0.2 + 1e-9, (name, got[name]["proportion_pct"], printed)
        deltas.append(delta)
    total_pct = sum(c["proportion_pct"] for c in payload["categories"])
    assert total_pct == pytest.approx(100.0, abs=0.1)
    return f"max row delta {max(deltas):.1f} points"


RAG_FIXTURES = [
    (
        "The framework builds instruction data in stages. <co:2>A multi-step "
        "pipeline turns raw source text into refined instructions, raising "
        "quality at every stage.</co>\nCited Documents: 2",
        [2],
    ),
    (
        "There are known risks. <co:0>Generated corpora can degrade a model "
        "when used uncritically, so curation effort remains necessary.</co>\n"
        "Cited Documents: 0",
        [0],
    ),
]

AGENTIC_PREFIX = (
    "<SCRATCHPAD>\n<RESTATEMENT>\nWire a chat service to a hosted model.\n"
    "</RESTATEMENT>\n<REASONING>\n<THOUGHT_1>\nRank candidate models by "
    "download count and take the top one.\n</THOUGHT_1>\n"
)

CONFORMANCE_DOC = (
    "Lead-in prose where 1<2 and a stray < survives.\n"
    '<tools>[{"name":"search","parameters":{"type":"object"}}]</tools>\n'
    '<tool_call>{"name":"search","arguments":{"q":"varlen"}}</tool_call>\n'
    '<tool_response>{"hits": [1, 2]}</tool_response>\n'
    "answer with <co:2>one grounded claim</co> and <co: 4>another</co>\n"
    "<SCRATCHPAD><RESTATEMENT>r</RESTATEMENT><REASONING>"
    "<THOUGHT_1>t1</THOUGHT_1><THOUGHT_2>t2</THOUGHT_2></REASONING>"
    "</SCRATCHPAD>\n<SOLUTION>print()</SOLUTION> trailing words"
)


@criterion("wire-format conformance and chunking invariance")
def test_protocol_conformance():
    for text, want_ids in RAG_FIXTURES:
        _, spans, cited = extract_citations(text)
        assert cited == want_ids
        assert len(spans) == 1 and spans[0].doc_id == want_ids[0]

    tree = parse_agentic(AGENTIC_PREFIX)
    present = {"SCRATCHPAD", "RESTATEMENT", "REASONING", "THOUGHT_1"}
    scratch = tree.root.children[0]
    assert scratch.name == "SCRATCHPAD"
    assert {n.name for n in scratch.find_all("THOUGHT_1")} | {
        c.name for c in scratch.children
    } >= {"RESTATEMENT", "REASONING"}
    assert all(d.tag not in present for d in tree.diagnostics)

    whole = list(stream_events([CONFORMANCE_DOC]))
    assert not any(isinstance(e, StreamError) for e in whole)
    rng = random.Random(0xC0FFEE)
    n = len(CONFORMANCE_DOC)
    splits = 0
    for _ in range(10_000):
        cuts = sorted(rng.sample(range(1, n), rng.randint(0, 12)))
        chunks = [CONFORMANCE_DOC[a:b] for a, b in zip([0] + cuts, cuts + [n])]
        assert list(stream_events(chunks)) == whole
        splits += 1
    assert splits >= 10_000
    return f"cited ids ok, {splits} chunkings identical"


@criterion("full-scale training metrics are out of scope")
def test_full_scale_out_of_scope():
    """Multi-thousand-GPU training runs and leaderboard score tables cannot
    be reproduced at desk scale; this suite covers their data-prep machinery
    through the numeric fixtures and property suites above, and asserts
    nothing about downstream model quality."""
    return "documented; no GPU-scale claims made"
