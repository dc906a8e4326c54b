"""Command-line pipeline: validate / simulate / analyze / compare.

Exit codes: 0 success, 1 usage error, 2 data or validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import report, simgen
from .errors import AgentTraceError, DataError, IoError, MissingFile
from .failure import FAILURE_CATEGORIES, LlmJudgeClient, RuleJudge
from .ingest import load_corpus, load_run_resources
from .metrics import PriceTable, compute_run_metrics, group_delta
from .similarity import JACCARD, LCS, MEAN_WITHIN, MEDIAN_CROSS
from .trace_model import parse_trace_file, validate_trace

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; we reserve 2 for data errors."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="agenttrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_validate = sub.add_parser("validate", help="schema-check trace files")
    p_validate.add_argument("paths", nargs="+", help="trace files or directories to scan")

    p_simulate = sub.add_parser("simulate", help="generate a synthetic corpus")
    p_simulate.add_argument("--arch", required=True, help="architecture template")
    p_simulate.add_argument("--runs", type=int, default=20)
    p_simulate.add_argument("--seed", type=int, default=0)
    p_simulate.add_argument("--tools", choices=["on", "off"], default="off")
    p_simulate.add_argument("--out", required=True, help="corpus output directory")
    p_simulate.add_argument("--model", default="sim-model-a", help="model label for manifests")
    p_simulate.add_argument("--agents", type=int, default=4)
    p_simulate.add_argument("--rounds", type=int, default=1)
    p_simulate.add_argument("--name", default="", help="example name (defaults to sim_<arch>)")
    p_simulate.add_argument(
        "--inject",
        default="",
        help="failure injection, e.g. 'timeout=0.1,exception=0.05'",
    )

    p_analyze = sub.add_parser("analyze", help="produce the report bundle for a corpus")
    p_analyze.add_argument("--corpus", required=True)
    p_analyze.add_argument("--out", required=True)
    p_analyze.add_argument("--group-by", default="", help="comma-separated manifest fields")
    p_analyze.add_argument("--metric", default="jaccard,lcs", help="jaccard|lcs (comma list allowed)")
    p_analyze.add_argument("--aggregation", choices=["mean", "median"], default="median")
    p_analyze.add_argument("--prices", default=None, help="price table JSON file")
    p_analyze.add_argument("--judge", choices=["rule", "external"], default="rule")
    p_analyze.add_argument("--judge-endpoint", default=None)
    p_analyze.add_argument("--judge-model", default=None)

    p_compare = sub.add_parser("compare", help="delta analysis between two run groups")
    p_compare.add_argument("--corpus", required=True)
    p_compare.add_argument("--filter-on", required=True, help="e.g. 'tools_enabled=true'")
    p_compare.add_argument("--filter-off", required=True)
    p_compare.add_argument("--metric-name", default="latency")
    p_compare.add_argument("--paired", choices=["on", "off"], default="off")
    p_compare.add_argument("--prices", default=None)
    p_compare.add_argument("--out", default=None, help="directory for deltas.csv/deltas.json")
    return parser


def _iter_trace_files(paths: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(path.rglob("*.trace.json")))
        elif path.is_file():
            files.append(path)
        else:
            raise MissingFile(f"no such file or directory: {path}")
    return files


def cmd_validate(args: argparse.Namespace) -> int:
    files = _iter_trace_files(args.paths)
    total_violations = 0
    parse_failures = 0
    for path in files:
        try:
            spans = parse_trace_file(path.read_bytes())
        except DataError as exc:
            print(f"{path}: PARSE ERROR: {exc}")
            parse_failures += 1
            continue
        violations = validate_trace(spans)
        for index, violation in violations:
            print(f"{path}: span[{index}] {violation}")
        total_violations += len(violations)
        if not violations:
            print(f"{path}: OK ({len(spans)} spans)")
    if parse_failures or total_violations:
        print(f"FAIL: {parse_failures} unparseable file(s), {total_violations} violation(s)")
        return EXIT_DATA
    print(f"OK: {len(files)} file(s) valid")
    return EXIT_OK


def _parse_injection(spec: str) -> dict[str, float]:
    injection: dict[str, float] = {}
    if not spec:
        return injection
    for part in spec.split(","):
        if "=" not in part:
            raise _UsageError(f"bad --inject entry {part!r}, expected category=probability")
        category, _, prob = part.partition("=")
        category = category.strip().replace("-", "_")
        if category not in FAILURE_CATEGORIES:
            raise _UsageError(f"unknown failure category {category!r}")
        injection[category] = float(prob)
    return injection


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.runs < 1:
        raise _UsageError("--runs must be >= 1")
    config = simgen.SimConfig(
        architecture=args.arch.replace("-", "_"),
        n_agents=args.agents,
        n_runs=args.runs,
        seed=args.seed,
        model_label=args.model,
        tools_enabled=args.tools == "on",
        rounds=args.rounds,
        failure_injection=_parse_injection(args.inject),
        example_name=args.name,
    )
    manifests = simgen.generate_corpus(config, args.out)
    print(f"wrote {len(manifests)} runs to {args.out}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    metrics = tuple(m.strip() for m in args.metric.split(",") if m.strip())
    for metric in metrics:
        if metric not in (JACCARD, LCS):
            raise _UsageError(f"--metric must be jaccard or lcs, got {metric!r}")
    group_by = tuple(g.strip() for g in args.group_by.split(",") if g.strip())
    judge = RuleJudge()
    if args.judge == "external":
        if not args.judge_endpoint or not args.judge_model:
            raise _UsageError("--judge external requires --judge-endpoint and --judge-model")
        judge = LlmJudgeClient(endpoint=args.judge_endpoint, model_label=args.judge_model)
    prices = PriceTable.from_json_file(args.prices) if args.prices else None
    config = report.AnalysisConfig(
        corpus_dir=Path(args.corpus),
        output_dir=Path(args.out),
        group_by=group_by,
        similarity_metrics=metrics,
        aggregation=MEAN_WITHIN if args.aggregation == "mean" else MEDIAN_CROSS,
        price_table=prices,
        judge=judge,
    )
    summary = report.analyze_corpus(config)
    print(f"analyzed {summary['n_runs']} runs into {args.out}")
    return EXIT_OK


def _parse_filter(spec: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for part in spec.split(","):
        if not part.strip():
            continue
        if "=" not in part:
            raise _UsageError(f"bad filter entry {part!r}, expected field=value")
        key, _, value = part.partition("=")
        out[key.strip()] = value.strip()
    if not out:
        raise _UsageError("empty group filter")
    return out


def cmd_compare(args: argparse.Namespace) -> int:
    filter_on = _parse_filter(args.filter_on)
    filter_off = _parse_filter(args.filter_off)
    prices = PriceTable.from_json_file(args.prices) if args.prices else None
    corpus = load_corpus(args.corpus)
    runs = [run for group in corpus.values() for run in group]

    def matches(run, flt: dict[str, str]) -> bool:
        for key, expected in flt.items():
            if key not in run.manifest.__dataclass_fields__:
                raise DataError(f"unknown manifest field {key!r} in filter")
            if str(getattr(run.manifest, key)).lower() != expected.lower():
                return False
        return True

    group_on = [compute_run_metrics(r, prices, load_run_resources(r)) for r in runs if matches(r, filter_on)]
    group_off = [compute_run_metrics(r, prices, load_run_resources(r)) for r in runs if matches(r, filter_off)]
    if not group_on or not group_off:
        raise DataError(
            f"filters matched {len(group_on)}/{len(group_off)} runs; both must match at least one"
        )
    pairing = "by_task_id" if args.paired == "on" else "unpaired"
    delta = group_delta(args.metric_name, group_on, group_off, pairing)

    doc = {
        "metric_name": delta.metric_name,
        "pairing": delta.pairing,
        "fraction_improved": delta.fraction_improved,
        "deltas": [{"task_id": task_id, "delta": value} for task_id, value in delta.deltas],
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "deltas.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        lines = ["task_id,delta"]
        lines += [f"{task_id or ''},{value!r}" for task_id, value in delta.deltas]
        (out / "deltas.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"{delta.metric_name} ({delta.pairing}): {len(delta.deltas)} delta(s), "
        f"fraction_improved={delta.fraction_improved:.3f}"
    )
    return EXIT_OK


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "compare": cmd_compare,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except IoError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except AgentTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
