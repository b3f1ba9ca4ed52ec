"""Command-line entry point.

Exit codes: 0 success, 1 validation or analysis failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from . import heuristics as H
from .deduction import ALL_RULES, CC, export_result, load_result, parse_rules, run_fixpoint
from .errors import RingTraceError
from .ingest import ForkSpec, build_ledger
from .oracle import dump_assignments, enumerate_assignments
from .reporting import (
    Window, delta_csv, delta_report, monthly_aggregate, monthly_csv, summarize, summary_csv,
)
from .simulator import GroundTruth, SimConfig, simulate

MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS
    parser.add_argument("--seed", type=int, default=d if suppress else None,
                        help="override the simulator seed")
    parser.add_argument("--threads", type=int, default=d if suppress else os.cpu_count() or 1,
                        help="worker threads for the deduction engine (results do not depend on it)")
    parser.add_argument("--format", choices=("csv", "json"), default=d if suppress else "csv",
                        help="table output format")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ringtrace", description="Ring signature traceability analysis.")
    _globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic ledger with ground truth")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)

    a = sub.add_parser("analyze", help="run the deduction rules to a fixpoint")
    a.add_argument("--spec", required=True, help="fork spec JSON (or a single branch file)")
    a.add_argument("--rules", default=",".join(ALL_RULES))
    a.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="score a guessing heuristic")
    e.add_argument("--heuristic", choices=(H.GNH, H.OMH), required=True)
    e.add_argument("--truth", choices=("ground", "deduced"), required=True)
    e.add_argument("--basis", choices=(H.IN_TIME, H.OUT_TIME), default=H.IN_TIME)
    e.add_argument("--spec", help="fork spec; defaults to the one recorded by analyze")
    e.add_argument("--analysis", help="analyze output directory (needed for --truth deduced)")
    e.add_argument("--truth-file", help="truth.jsonl; defaults to the one next to the spec")
    e.add_argument("--out", help="write the table here instead of stdout")

    r = sub.add_parser("report", help="tables over a date window")
    r.add_argument("--analysis", required=True, help="analyze output directory")
    r.add_argument("--baseline", help="analysis to compare against (default: same rules without cc)")
    r.add_argument("--from", dest="start")
    r.add_argument("--to", dest="end")
    r.add_argument("--monthly", action="store_true", help="one row per branch and month")
    r.add_argument("--summary", action="store_true", help="window totals per branch")
    r.add_argument("--out")

    o = sub.add_parser("oracle", help="exhaustive check on a small ledger")
    o.add_argument("--spec", required=True)
    o.add_argument("--max-component", type=int, default=12)
    o.add_argument("--limit", type=int, default=1_000_000)
    o.add_argument("--dump", action="store_true", help="print every assignment")

    for sp in (s, a, e, r, o):
        _globals(sp, suppress=True)
    return p


# ---------------------------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _table(args, csv_text: str) -> str:
    if args.format == "csv":
        return csv_text
    rows = list(csv.reader(csv_text.splitlines()))
    head = rows[0]
    return "".join(json.dumps({k: v if k in _TEXT else _scalar(v) for k, v in zip(head, r)}) + "\n" for r in rows[1:])


_TEXT = {"month", "branch", "metric", "heuristic", "basis"}


def _scalar(cell: str):
    if cell == "":
        return None
    for conv in (int, float):
        try:
            return conv(cell)
        except ValueError:
            pass
    return cell


def _load_spec(path: str):
    if not Path(path).exists():
        raise UsageError(f"no such file: {path}")
    if path.endswith(".jsonl"):
        spec = ForkSpec.single(Path(path).stem, str(Path(path).resolve()))
    else:
        spec = ForkSpec.load(path)
    view, report = build_ledger(spec)
    for w in report.warnings:
        print(f"warning: {w.rule} at {w.location}: {w.message}", file=sys.stderr)
    return view, report


def _manifest(analysis: str) -> dict:
    p = Path(analysis) / MANIFEST
    if not p.exists():
        raise UsageError(f"{analysis} is not an analyze output directory")
    return json.loads(p.read_text(encoding="utf-8"))


def cmd_simulate(args) -> int:
    if not Path(args.config).exists():
        raise UsageError(f"no such file: {args.config}")
    cfg = SimConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    res = simulate(cfg)
    spec = res.write(args.out)
    print(f"wrote {spec}: {sum(res.stats['rings'].values())} rings, "
          f"{res.stats['cross_chain_key_images']} cross-chain key images", file=sys.stderr)
    return 0


def cmd_analyze(args) -> int:
    rules = parse_rules(args.rules)
    view, report = _load_spec(args.spec)
    result = run_fixpoint(view, rules, threads=max(1, args.threads))
    export_result(result, args.out)
    manifest = {
        "spec": str(Path(args.spec).resolve()),
        "rules": list(rules),
        "iterations": result.iterations,
        "changes": result.changes,
        "resolved": len(result.resolved),
        "counts": {b: vars(c) for b, c in report.timeline.items()},
        "own_counts": {b: vars(c) for b, c in report.own.items()},
    }
    (Path(args.out) / MANIFEST).write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    print(f"{len(result.resolved)} key images resolved in {result.iterations} iterations",
          file=sys.stderr)
    return 0


def _analysis(path: str, view=None):
    m = _manifest(path)
    if view is None:
        view, _ = _load_spec(m["spec"])
    return load_result(view, path, m["rules"]), view, m


def cmd_evaluate(args) -> int:
    spec = args.spec
    if spec is None:
        if not args.analysis:
            raise UsageError("evaluate needs --spec or --analysis")
        spec = _manifest(args.analysis)["spec"]
    view, _ = _load_spec(spec)
    if args.truth == "deduced":
        if not args.analysis:
            raise UsageError("--truth deduced needs --analysis")
        truth, _, _ = _analysis(args.analysis, view)
    else:
        tf = args.truth_file or str(Path(spec).parent / "truth.jsonl")
        if not Path(tf).exists():
            raise UsageError(f"no ground truth file: {tf}")
        truth = GroundTruth.load(tf)
    rows = H.evaluate(H.guesses_for(view, args.heuristic), truth, view, args.basis)
    _emit(_table(args, H.accuracy_csv(rows)), args.out)
    return 0


def cmd_report(args) -> int:
    result, view, m = _analysis(args.analysis)
    window = Window.from_dates(args.start, args.end)
    if args.monthly:
        text = monthly_csv(monthly_aggregate(result, view, window))
    elif args.summary:
        text = summary_csv(summarize(monthly_aggregate(result, view, window)))
    else:
        if args.baseline:
            base, _, _ = _analysis(args.baseline, view)
        else:
            # recompute in memory; the analysis directory is never touched
            rules = [r for r in m["rules"] if r != CC]
            base = run_fixpoint(view, rules, threads=max(1, args.threads))
        text = delta_csv(delta_report(result, base, view, window))
    _emit(_table(args, text), args.out)
    return 0


def cmd_oracle(args) -> int:
    view, _ = _load_spec(args.spec)
    if args.dump:
        print(dump_assignments(view, limit=args.limit))
        return 0
    res = enumerate_assignments(view, max_component=args.max_component, limit=args.limit)
    out = {
        "assignments": res.count,
        "saturated": res.saturated,
        "components": res.components,
        "traced": {ki: view.output_ref(u).to_json() for ki, u in sorted(res.traced().items())},
        "candidates": {
            ki: [view.output_ref(u).to_json() for u in sorted(c)]
            for ki, c in sorted(res.candidates.items())
        },
    }
    print(json.dumps(out, indent=1))
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "oracle": cmd_oracle,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, RingTraceError):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except RingTraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
