from __future__ import annotations

import json
import random
import subprocess
import sys

import numpy as np
import pytest

import sftforge_bindings as fb
from sftforge.packing import OversizedSampleError, Strategy

FIXTURE_LENGTHS = [11, 6, 7, 4, 8, 4, 3, 4, 3, 3, 5, 3]


def make_pairs(lengths, seed=0):
    rng = random.Random(seed)
    pairs = []
    for n in lengths:
        tokens = [rng.randrange(0, 256) for _ in range(n)]
        cut = rng.randrange(0, n)
        labels = [t if i >= cut else -100 for i, t in enumerate(tokens)]
        pairs.append((tokens, labels))
    return pairs


def write_rendered_jsonl(path, pairs):
    with open(path, "w") as f:
        for i, (tokens, labels) in enumerate(pairs):
            f.write(json.dumps({"id": f"s{i}", "tokens": tokens, "labels": labels}) + "\n")


def cli_pack(tmp_path, pairs, capacity, strategy, tag=""):
    infile = tmp_path / f"in{tag}.jsonl"
    out = tmp_path / f"out{tag}.hpak"
    write_rendered_jsonl(infile, pairs)
    proc = subprocess.run(
        [
            sys.executable, "-m", "sftforge", "pack",
            "--in", str(infile), "--out", str(out),
            "--manifest", str(tmp_path / f"m{tag}.json"),
            "--seq-len", str(capacity), "--strategy", strategy,
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return out.read_bytes()


class TestPack:
    def test_fixture_views(self):
        views = fb.pack(make_pairs(FIXTURE_LENGTHS), 64, "contiguous")
        assert len(views) == 1
        view = views[0]
        assert view.cu_seqlens.tolist() == [
            0, 11, 17, 24, 28, 36, 40, 43, 47, 50, 53, 58, 61, 64,
        ]
        assert view.capacity == 64
        assert view.n_segments == 13
        assert view.tokens.dtype == np.uint32
        assert view.labels.dtype == np.int32
        assert view.cu_seqlens.dtype == np.uint32
        assert view.tokens.flags.c_contiguous

    def test_views_are_immutable(self):
        (view,) = fb.pack(make_pairs([4, 4]), 8, "first_fit")
        with pytest.raises(ValueError):
            view.tokens[0] = 1

    def test_empty_input(self):
        assert fb.pack([], 8) == []

    def test_oversized_surfaces_core_exception(self):
        with pytest.raises(OversizedSampleError):
            fb.pack(make_pairs([99]), 64)

    def test_strategy_enum_accepted(self):
        views = fb.pack(make_pairs([4, 4]), 8, Strategy.FIRST_FIT_DECREASING)
        assert len(views) == 1


class TestCliParity:
    def test_fixture_bytes_identical(self, tmp_path):
        pairs = make_pairs(FIXTURE_LENGTHS)
        cli_bytes = cli_pack(tmp_path, pairs, 64, "contiguous")
        bind_path = tmp_path / "bind.hpak"
        fb.pack_hpak(pairs, bind_path, 64, "contiguous")
        assert bind_path.read_bytes() == cli_bytes

    def test_hundred_random_corpora(self, tmp_path):
        rng = random.Random(31337)
        strategies = [s.value for s in Strategy]
        for trial in range(100):
            capacity = rng.choice((16, 32, 64))
            k = rng.randint(1, 12)
            lengths = [rng.randint(1, capacity) for _ in range(k)]
            pairs = make_pairs(lengths, seed=trial)
            strategy = strategies[trial % len(strategies)]
            cli_bytes = cli_pack(tmp_path, pairs, capacity, strategy, tag=str(trial))
            bind_path = tmp_path / f"bind{trial}.hpak"
            fb.pack_hpak(pairs, bind_path, capacity, strategy)
            assert bind_path.read_bytes() == cli_bytes, (trial, strategy, lengths)


class TestLoadHpak:
    def test_round_trip_exact(self, tmp_path):
        pairs = make_pairs(FIXTURE_LENGTHS)
        path = tmp_path / "rt.hpak"
        packed = fb.pack_hpak(pairs, path, 64, "contiguous")
        loaded = fb.load_hpak(path)
        assert len(loaded) == len(packed)
        for a, b in zip(packed, loaded):
            np.testing.assert_array_equal(a.tokens, b.tokens)
            np.testing.assert_array_equal(a.labels, b.labels)
            np.testing.assert_array_equal(a.cu_seqlens, b.cu_seqlens)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "t.hpak"
        fb.pack_hpak(make_pairs([4]), path, 8)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(fb.HpakError):
            fb.load_hpak(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.hpak"
        path.write_bytes(b"WHAT" + b"\x00" * 12)
        with pytest.raises(fb.HpakError):
            fb.load_hpak(path)

    def test_unsupported_version(self, tmp_path):
        import struct

        path = tmp_path / "v2.hpak"
        path.write_bytes(struct.pack("<4sIII", b"HPAK", 2, 8, 0))
        with pytest.raises(fb.UnsupportedVersionError):
            fb.load_hpak(path)


class TestRender:
    def test_render_arrays(self):
        tokens, labels = fb.render(
            [
                {"role": "user", "content": "Hi"},
                {"role": "assistant", "content": "Yo"},
            ]
        )
        assert tokens.shape == (25,)
        assert labels.dtype == np.int32
        assert int((labels != -100).sum()) == 3

    def test_render_then_pack(self):
        tokens, labels = fb.render(
            [
                {"role": "user", "content": "Hi"},
                {"role": "assistant", "content": "Yo"},
            ]
        )
        views = fb.pack([(tokens.tolist(), labels.tolist())], 32)
        assert views[0].cu_seqlens.tolist() == [0, 25, 32]
