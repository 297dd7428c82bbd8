"""forge: command-line surface over the data-prep pipeline.

Subcommands: filter, render, pack, stats, select, parse. Reports are
machine-readable JSON by default; --pretty adds human-oriented tables.
Every command is deterministic given its inputs and config, and manifests
embed the config plus content hashes of the inputs.

Exit codes: 0 success, 1 operational error, 2 success with diagnostics.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field

from .corpus import Conversation, RecordError, ReferenceTokenizer, ingest
from .filters import DEFAULT_STAGE_ORDER, FilterConfig, run_pipeline
from .hpak import write_hpak
from .packing import OversizedSampleError, Strategy, efficiency, pack
from .protocol import (
    ProtocolError,
    extract_citations,
    parse_agentic,
    parse_tool_calls,
    parse_tool_responses,
)
from .render import (
    ChatTemplate,
    NoSupervisedTokensError,
    RenderedSample,
    category_table,
    render,
    token_split,
)
from .selection import ScoreMatrix, select_checkpoint

DEFAULT_CAPACITY = 8192


@dataclass
class PipelineConfig:
    tokenizer: str = "reference"
    template: ChatTemplate = field(default_factory=ChatTemplate)
    filter: FilterConfig = field(default_factory=FilterConfig)
    capacity: int = DEFAULT_CAPACITY
    strategy: str = Strategy.FIRST_FIT_DECREASING.value
    pad_as_segment: bool = True
    seed: int = 0
    stage_order: tuple = DEFAULT_STAGE_ORDER
    input_path: str | None = None
    output_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "tokenizer": self.tokenizer,
            "template": self.template.to_dict(),
            "filter": self.filter.to_dict(),
            "capacity": self.capacity,
            "strategy": self.strategy,
            "pad_as_segment": self.pad_as_segment,
            "seed": self.seed,
            "stage_order": list(self.stage_order),
            "input_path": self.input_path,
            "output_path": self.output_path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        cfg = cls()
        if "tokenizer" in d:
            cfg.tokenizer = d["tokenizer"]
        if "template" in d:
            cfg.template = ChatTemplate.from_dict(d["template"])
        if "filter" in d:
            cfg.filter = FilterConfig.from_dict(d["filter"])
        for key in ("capacity", "strategy", "pad_as_segment", "seed",
                    "input_path", "output_path"):
            if key in d:
                setattr(cfg, key, d[key])
        if "stage_order" in d:
            cfg.stage_order = tuple(d["stage_order"])
        return cfg

    @classmethod
    def load(cls, path: str | None) -> "PipelineConfig":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


class CliError(Exception):
    """Operational error: message to stderr, exit 1."""


def build_tokenizer(name: str) -> ReferenceTokenizer:
    if name != "reference":
        raise CliError(
            f"unknown tokenizer {name!r}; this build ships only 'reference' "
            "(production tokenizers plug in through the library interface)"
        )
    return ReferenceTokenizer()


def forge_threads() -> int:
    """Worker-count cap from FORGE_THREADS; execution is observably
    identical to single-threaded regardless."""
    raw = os.environ.get("FORGE_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise CliError(f"FORGE_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise CliError("FORGE_THREADS must be >= 1")
    return n


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _open_input(path: str):
    if not os.path.exists(path):
        raise CliError(f"input file not found: {path}")
    return open(path, encoding="utf-8")


def _write_json(path: str | None, payload: dict, pretty: bool = False, fp=None):
    text = json.dumps(payload, indent=2 if pretty else None, ensure_ascii=False)
    if path is None:
        print(text, file=fp or sys.stdout)
    else:
        with open(path, "w", encoding="utf-8") as f:
            f.write(text + "\n")


def cmd_filter(args) -> int:
    cfg = PipelineConfig.load(args.config)
    tok = build_tokenizer(args.tokenizer or cfg.tokenizer)
    forge_threads()
    errors: list[RecordError] = []
    kept_count = 0
    with _open_input(args.infile) as fin, open(args.out, "w", encoding="utf-8") as fout:
        convs = ingest(fin, errors)
        kept, report = run_pipeline(
            convs, tok, cfg.filter, stage_order=cfg.stage_order
        )
        for conv in kept:
            fout.write(json.dumps(conv.to_record(), ensure_ascii=False) + "\n")
            kept_count += 1
    report.ingest_errors = len(errors)
    payload = report.to_dict()
    payload["ingest_error_lines"] = [
        {"line": e.line, "kind": e.kind.value, "message": e.message} for e in errors
    ]
    if args.report:
        _write_json(args.report, payload, pretty=args.pretty)
    else:
        _write_json(None, payload, pretty=args.pretty)
    print(f"kept {kept_count} of {payload['total_in']} conversations", file=sys.stderr)
    return 0


def _read_conversations(path: str, errors: list[RecordError]):
    with _open_input(path) as f:
        yield from ingest(f, errors)


def cmd_render(args) -> int:
    cfg = PipelineConfig.load(args.config)
    tok = build_tokenizer(args.tokenizer or cfg.tokenizer)
    errors: list[RecordError] = []
    out = open(args.out, "w", encoding="utf-8") if args.out else None
    try:
        for conv in _read_conversations(args.infile, errors):
            try:
                sample = render(conv, cfg.template, tok)
            except NoSupervisedTokensError as exc:
                raise CliError(str(exc))
            if args.preview:
                _print_preview(conv, sample, tok)
            if out:
                rec = {"id": sample.id, "tokens": sample.tokens, "labels": sample.labels}
                out.write(json.dumps(rec) + "\n")
    finally:
        if out:
            out.close()
    if errors:
        for e in errors:
            print(f"line {e.line}: {e.kind.value}: {e.message}", file=sys.stderr)
        return 1
    return 0


def _print_preview(conv: Conversation, sample: RenderedSample, tok: ReferenceTokenizer):
    print(f"# {conv.id}: {len(sample)} tokens, {sample.supervised_count} supervised")
    print(f"{'idx':>5}  {'token':>6}  {'label':>6}  text")
    for i, (t, l) in enumerate(zip(sample.tokens, sample.labels)):
        try:
            shown = tok.decode([t]) if t < 256 else f"<{t}>"
        except ValueError:
            shown = "?"
        print(f"{i:>5}  {t:>6}  {l:>6}  {shown!r}")


def _load_samples(path: str, template: ChatTemplate, tok) -> list[RenderedSample]:
    """Accept either conversation records or pre-rendered {id, tokens,
    labels} records, telling them apart by shape."""
    samples: list[RenderedSample] = []
    errors: list[RecordError] = []
    with _open_input(path) as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"line {lineno}: invalid JSON: {exc.msg}")
            if isinstance(obj, dict) and "tokens" in obj and "labels" in obj:
                try:
                    samples.append(
                        RenderedSample(
                            tokens=list(obj["tokens"]),
                            labels=list(obj["labels"]),
                            id=obj.get("id"),
                        )
                    )
                except (TypeError, ValueError) as exc:
                    raise CliError(f"line {lineno}: bad rendered sample: {exc}")
            else:
                for conv in ingest([line], errors):
                    try:
                        samples.append(render(conv, template, tok))
                    except NoSupervisedTokensError as exc:
                        raise CliError(f"line {lineno}: {exc}")
                if errors:
                    e = errors[-1]
                    raise CliError(f"line {lineno}: {e.kind.value}: {e.message}")
    return samples


def cmd_pack(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.seq_len is not None:
        cfg.capacity = args.seq_len
    if args.strategy:
        cfg.strategy = args.strategy
    if cfg.capacity <= 0:
        raise CliError(f"--seq-len must be positive, got {cfg.capacity}")
    try:
        strategy = Strategy(cfg.strategy)
    except ValueError:
        raise CliError(f"unknown strategy {cfg.strategy!r}")
    tok = build_tokenizer(args.tokenizer or cfg.tokenizer)

    samples = _load_samples(args.infile, cfg.template, tok)
    try:
        batch = pack(
            samples,
            cfg.capacity,
            strategy,
            tok,
            pad_as_segment=cfg.pad_as_segment,
            truncate_oversize=args.truncate_oversize,
        )
    except OversizedSampleError as exc:
        ident = exc.sample_id if exc.sample_id else f"index {exc.index}"
        raise CliError(
            f"sample {ident} has {exc.length} tokens, over --seq-len {exc.capacity}; "
            "rerun with --truncate-oversize to cut it"
        )
    with open(args.out, "wb") as f:
        write_hpak(batch, f)

    report = efficiency(batch)
    manifest = {
        "format": "HPAK",
        "version": 1,
        "capacity": cfg.capacity,
        "strategy": strategy.value,
        "pad_as_segment": cfg.pad_as_segment,
        "tokenizer": tok.identity(),
        "counts": {
            "samples": len(samples),
            "buffers": batch.n_buffers,
            "truncated": batch.truncated,
        },
        "pad_counts": [b.pad_count for b in batch.buffers],
        "efficiency": report.to_dict(),
        "config": cfg.to_dict(),
        "input_sha256": _sha256_file(args.infile),
    }
    if args.manifest:
        _write_json(args.manifest, manifest, pretty=True)
    else:
        _write_json(None, manifest, pretty=args.pretty)
    return 0


def cmd_stats(args) -> int:
    cfg = PipelineConfig.load(args.config)
    tok = build_tokenizer(args.tokenizer or cfg.tokenizer)
    errors: list[RecordError] = []
    pairs = []
    for conv in _read_conversations(args.infile, errors):
        try:
            pairs.append((conv, render(conv, cfg.template, tok)))
        except NoSupervisedTokensError as exc:
            raise CliError(str(exc))
    split = token_split(s for _, s in pairs)
    rows = category_table(pairs)
    percents = _round_percentages([r.proportion for r in rows])
    payload = {
        "token_split": split.to_dict(),
        "total_tokens": sum(r.tokens for r in rows),
        "categories": [
            {"category": r.category, "tokens": r.tokens, "proportion_pct": p}
            for r, p in zip(rows, percents)
        ],
        "ingest_errors": len(errors),
    }
    _write_json(None, payload, pretty=args.pretty)
    if args.pretty:
        _print_category_table(payload)
    return 0


def _round_percentages(fractions: list[float]) -> list[float]:
    """Round proportions to one decimal so they sum to exactly 100.0
    (largest-remainder apportionment in tenths of a percent)."""
    if not fractions:
        return []
    tenths = [f * 1000.0 for f in fractions]
    floors = [int(t) for t in tenths]
    shortfall = 1000 - sum(floors)
    order = sorted(range(len(tenths)), key=lambda i: (floors[i] - tenths[i], i))
    for i in order[:shortfall]:
        floors[i] += 1
    return [x / 10.0 for x in floors]


def _print_category_table(payload: dict, fp=None):
    fp = fp or sys.stderr
    width = max((len(c["category"]) for c in payload["categories"]), default=8)
    print(f"{'Category':<{width}}  {'Proportion (%)':>14}  {'Tokens':>10}", file=fp)
    for row in payload["categories"]:
        print(
            f"{row['category']:<{width}}  {row['proportion_pct']:>14.1f}  {row['tokens']:>10}",
            file=fp,
        )
    print(f"{'Total':<{width}}  {100.0:>14.1f}  {payload['total_tokens']:>10}", file=fp)


def cmd_select(args) -> int:
    if not os.path.exists(args.scores):
        raise CliError(f"scores file not found: {args.scores}")
    with open(args.scores, encoding="utf-8") as f:
        text = f.read()
    try:
        if args.scores.endswith(".json"):
            matrix = ScoreMatrix.from_json(text)
        else:
            matrix = ScoreMatrix.from_csv(text)
    except (ValueError, KeyError) as exc:
        raise CliError(f"could not parse scores: {exc}")
    result = select_checkpoint(matrix)
    _write_json(args.out, result.to_dict(), pretty=args.pretty)
    print(f"selected epoch: {result.selected_epoch}", file=sys.stderr)
    return 0


def cmd_parse(args) -> int:
    text = sys.stdin.read()
    if args.mode == "tools":
        calls = parse_tool_calls(text)
        responses = parse_tool_responses(text)
        payload = {
            "tool_calls": [c.to_payload() for c in calls],
            "tool_responses": responses,
        }
        _write_json(None, payload, pretty=args.pretty)
        return 0
    if args.mode == "citations":
        clean, spans, cited = extract_citations(text)
        payload = {
            "clean_text": clean,
            "spans": [
                {"doc_id": s.doc_id, "start": s.start, "end": s.end, "text": s.text}
                for s in spans
            ],
            "cited_ids": cited,
        }
        _write_json(None, payload, pretty=args.pretty)
        return 0
    tree = parse_agentic(text)
    _write_json(None, tree.to_dict(), pretty=args.pretty)
    return 0 if tree.clean else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge", description="SFT data preparation pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common_io(p, out_required=True):
        p.add_argument("--in", dest="infile", required=True, help="input JSONL")
        if out_required:
            p.add_argument("--out", required=True, help="output path")
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--tokenizer", help="tokenizer choice (default: reference)")
        p.add_argument("--pretty", action="store_true", help="human-readable output")

    p = sub.add_parser("filter", help="drop low-quality conversations")
    common_io(p)
    p.add_argument("--report", help="where to write the drop report JSON")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("render", help="render conversations to token/label JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="rendered-sample JSONL (optional with --preview)")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--tokenizer")
    p.add_argument("--preview", action="store_true", help="print aligned token/label columns")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("pack", help="pack samples into fixed-capacity buffers")
    common_io(p)
    p.add_argument("--seq-len", type=int, help=f"buffer capacity (default {DEFAULT_CAPACITY})")
    p.add_argument("--strategy", choices=[s.value for s in Strategy])
    p.add_argument("--manifest", help="where to write the manifest JSON")
    p.add_argument("--truncate-oversize", action="store_true")
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("stats", help="token split and category table")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--tokenizer")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("select", help="pick the best epoch from a score grid")
    p.add_argument("--scores", required=True, help="CSV (suites x epochs) or .json")
    p.add_argument("--out", help="write the selection result JSON here")
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("parse", help="parse wire formats from stdin")
    p.add_argument("--mode", choices=("tools", "citations", "agentic"), required=True)
    p.add_argument("--pretty", action="store_true")
    p.set_defaults(func=cmd_parse)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"forge: error: {exc}", file=sys.stderr)
        return 1
    except ProtocolError as exc:
        print(f"forge: parse error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"forge: i/o error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
