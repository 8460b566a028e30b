"""Command-line front end: ``analyze``, ``oracle-check`` and ``generate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

from . import oracle
from .generate import GeneratorConfig, generate_lines
from .orders import CHAIN, OrderVariant, annotate, ordered_pairs
from .patterns import DEFAULT_MAX_CYCLE, CycleLimitExceeded, compute_dependencies, enumerate_patterns, lockset, pattern_instances
from .spd import DeadlockReport, check_instance, compute_sp_deadlocks
from .trace import IllFormedTrace, Op, Trace, TraceError, normalize
from .traceio import TraceSyntaxError, parse_trace

EXIT_CLEAN, EXIT_DEADLOCK, EXIT_INPUT, EXIT_TOO_LARGE = 0, 1, 2, 3


@dataclass
class RunStats:
    events: int
    threads: int
    locks: int
    variables: int
    deadlocks: int = 0
    patterns: int = 0
    deps: int = 0
    d_plus: int = 0
    g_plus: int = 0
    phase1_time: float = 0.0
    phase2_time: float = 0.0


@dataclass
class VariantRun:
    variant: OrderVariant
    stats: RunStats
    reports: list[DeadlockReport] = field(default_factory=list)


def source_row(trace: Trace, event_id: int) -> int | None:
    """Input row of an event; synthetic requests borrow their acquire's row."""
    e = trace[event_id]
    if e.row is not None:
        return e.row
    if e.op is Op.REQ:
        a = trace.acquire_of(event_id)
        if a is not None:
            return trace[a].row
    return None


def run_variant(trace: Trace, variant: OrderVariant, max_cycle: int, include_witness: bool) -> VariantRun:
    stats = RunStats(
        events=len(trace),
        threads=trace.num_threads,
        locks=len(trace.locks()),
        variables=len(trace.variables()),
    )
    t0 = time.monotonic()
    deps = compute_dependencies(trace, variant)
    patterns = enumerate_patterns(deps, max_cycle)
    t1 = time.monotonic()
    reports = compute_sp_deadlocks(trace, variant, max_cycle, deps=deps, with_witness=include_witness, patterns=patterns)
    t2 = time.monotonic()
    stats.patterns = len(patterns)
    stats.deps = deps.stats.deps
    stats.d_plus = deps.stats.d_plus
    stats.g_plus = deps.stats.g_plus
    stats.deadlocks = len(reports)
    stats.phase1_time = t1 - t0
    stats.phase2_time = t2 - t1
    return VariantRun(variant, stats, reports)


def report_json(trace: Trace, report: DeadlockReport) -> dict:
    names = trace.thread_names
    out = {
        "requests": [
            {"event": r.event, "row": source_row(trace, r.event), "thread": names[r.thread], "lock": r.lock}
            for r in report.requests
        ],
        "pattern": [
            {"thread": names[t], "lock": lock, "lockset": sorted([l, names[u]] for l, u in ls)}
            for t, lock, ls in report.pattern
        ],
        "witness_clocks": [list(c.padded(trace.num_threads)) for c in report.witness_clocks],
    }
    if report.witness is not None:
        out["witness"] = [
            {"event": e, "row": trace[e].row, "thread": names[trace[e].thread], "op": trace[e].op.value, "target": trace[e].target}
            for e in report.witness
            if not trace[e].synthetic
        ]
    return out


def analyze_file(path: str, variants: Sequence[OrderVariant], max_cycle: int, include_witness: bool) -> tuple[dict, int]:
    """Analysis result as a JSON-ready dict plus an exit code."""
    try:
        trace = normalize(parse_trace(path))
    except (TraceSyntaxError, TraceError, OSError) as exc:
        err = {"file": path, "error": str(exc)}
        if isinstance(exc, IllFormedTrace):
            err["violations"] = [str(v) for v in exc.violations]
        return err, EXIT_INPUT
    runs = []
    found = False
    for v in variants:
        try:
            run = run_variant(trace, v, max_cycle, include_witness)
        except CycleLimitExceeded as exc:
            return {"file": path, "error": str(exc)}, EXIT_INPUT
        found = found or bool(run.reports)
        runs.append(
            {
                "variant": v.value,
                "stats": asdict(run.stats),
                "deadlocks": [report_json(trace, r) for r in run.reports],
            }
        )
    return {"file": path, "runs": runs}, EXIT_DEADLOCK if found else EXIT_CLEAN


def _analyze_job(args: tuple) -> tuple[dict, int]:
    return analyze_file(*args)


def render_table(result: dict) -> str:
    if "error" in result:
        lines = [f"{result['file']}: error: {result['error']}"]
        lines.extend(f"  {v}" for v in result.get("violations", []))
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    buf.write(f"{result['file']}\n")
    header = f"  {'variant':<8}{'Dlk':>6}{'Pat':>6}{'Deps':>8}{'D+':>6}{'G+':>6}{'phase1(s)':>11}{'phase2(s)':>11}\n"
    buf.write(header)
    for run in result["runs"]:
        s = run["stats"]
        buf.write(
            f"  {run['variant']:<8}{s['deadlocks']:>6}{s['patterns']:>6}{s['deps']:>8}{s['d_plus']:>6}"
            f"{s['g_plus']:>6}{s['phase1_time']:>11.3f}{s['phase2_time']:>11.3f}\n"
        )
    for run in result["runs"]:
        for i, d in enumerate(run["deadlocks"], start=1):
            reqs = "  ".join(f"{r['thread']} req({r['lock']}) @row {r['row']}" for r in d["requests"])
            buf.write(f"  deadlock {i} [{run['variant']}]: {reqs}\n")
            if "witness" in d:
                steps = " ".join(f"{w['thread']}:{w['op']}({w['target']})" for w in d["witness"])
                buf.write(f"    witness: {steps}\n")
    return buf.getvalue()


CSV_FIELDS = ["file", "variant", "events", "threads", "locks", "variables", "deadlocks", "patterns", "deps", "d_plus", "g_plus", "phase1_time", "phase2_time"]


def render_csv(results: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for res in results:
        for run in res.get("runs", []):
            w.writerow({"file": res["file"], "variant": run["variant"], **run["stats"]})
    return buf.getvalue()


def _variants(choice: str) -> list[OrderVariant]:
    if choice == "all":
        return list(CHAIN)
    return [OrderVariant.parse(choice)]


def cmd_analyze(args: argparse.Namespace) -> int:
    variants = _variants(args.lockset)
    jobs = [(p, variants, args.max_cycle, args.include_witness) for p in args.paths]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_analyze_job, jobs))
    else:
        outcomes = [_analyze_job(j) for j in jobs]
    results = [r for r, _ in outcomes]
    codes = [c for _, c in outcomes]
    if args.format == "json":
        payload = results[0] if len(results) == 1 else results
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    elif args.format == "csv":
        sys.stdout.write(render_csv(results))
        for r in results:
            if "error" in r:
                sys.stderr.write(render_table(r))
    else:
        for r in results:
            (sys.stderr if "error" in r else sys.stdout).write(render_table(r))
    if EXIT_INPUT in codes:
        return EXIT_INPUT
    return EXIT_DEADLOCK if EXIT_DEADLOCK in codes else EXIT_CLEAN


def oracle_compare(trace: Trace, variant: OrderVariant, max_events: int | None = None) -> list[str]:
    """Disagreements between the engines and the oracle; empty means all agree."""
    problems: list[str] = []
    ann = annotate(trace, variant)
    pairs = ordered_pairs(ann)
    declared = oracle.declarative_order(trace, variant)
    if pairs != declared:
        problems.append(f"{variant.value}: clock order differs from declarative order on {len(pairs ^ declared)} pairs")
    prec = oracle.precedence(trace, max_events)
    broken = sorted((e, f) for e, f in pairs if not prec.must_precede(e, f))
    if broken:
        e, f = broken[0]
        problems.append(f"{variant.value}: MHB violated, e{e} < e{f} but some reordering places e{f} without e{e} before it")
    if not variant.is_mhb:
        return problems

    general = oracle.general_locksets(trace, max_events)
    deps = compute_dependencies(trace, variant, ann)
    streamed = {q: key[2] for q, key in deps.of_request().items()}
    for e in trace.events:
        ls = lockset(trace, variant, e.id, ann)
        if e.op is Op.REQ and ls and streamed.get(e.id) != ls:
            problems.append(f"{variant.value}: streamed lock set of e{e.id} differs from lockset()")
        if not ls <= general[e.id]:
            problems.append(f"{variant.value}: lock set of e{e.id} exceeds the general lock set")

    lw = ann if variant is OrderVariant.LW else annotate(trace, OrderVariant.LW)
    sp = oracle.Explorer(trace, True, max_events)
    for pattern in enumerate_patterns(deps):
        for inst in pattern_instances(deps, pattern):
            fast = check_instance(trace, sorted(inst), lw)
            slow = oracle.is_predictable_deadlock(trace, inst, explorer=sp) is not None
            if fast != slow:
                problems.append(f"{variant.value}: closure verdict {fast} but oracle says {slow} for {sorted(inst)}")
    for rep in compute_sp_deadlocks(trace, variant, deps=deps):
        w = oracle.is_predictable_deadlock(trace, rep.request_ids, explorer=sp)
        if w is None:
            problems.append(f"{variant.value}: reported deadlock {sorted(rep.request_ids)} has no sync-preserving witness")
        elif not oracle.is_stuck(trace, w, rep.request_ids, max_events):
            problems.append(f"{variant.value}: witness for {sorted(rep.request_ids)} is not stuck")
    return problems


def cmd_oracle_check(args: argparse.Namespace) -> int:
    try:
        trace = normalize(parse_trace(args.path))
    except (TraceSyntaxError, TraceError, OSError) as exc:
        sys.stderr.write(f"{args.path}: error: {exc}\n")
        return EXIT_INPUT
    variants = list(CHAIN) if args.lockset == "all" else [OrderVariant.parse(args.lockset)]
    try:
        problems = [p for v in variants for p in oracle_compare(trace, v, args.max_events)]
    except oracle.TraceTooLarge as exc:
        sys.stderr.write(f"{args.path}: {exc}\n")
        return EXIT_TOO_LARGE
    if problems:
        for p in problems:
            sys.stdout.write(f"DISAGREE {p}\n")
        return EXIT_DEADLOCK
    sys.stdout.write(f"all-agree ({', '.join(v.value for v in variants)})\n")
    return EXIT_CLEAN


def cmd_generate(args: argparse.Namespace) -> int:
    cfg = GeneratorConfig(
        events=args.events,
        threads=args.threads,
        locks=args.locks,
        variables=args.vars,
        seed=args.seed,
        deadlock_bias=args.deadlock_bias,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8")
    try:
        chunk: list[str] = []
        for line in generate_lines(cfg):
            chunk.append(line)
            if len(chunk) >= 65536:
                out.write("".join(chunk))
                chunk.clear()
        out.write("".join(chunk))
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_CLEAN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lockhound", description="Sound lock-set based deadlock prediction on traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="report predicted deadlocks")
    a.add_argument("paths", nargs="+", help="trace files ('-' for stdin)")
    a.add_argument("--lockset", choices=["to", "lw", "ro", "all"], default="lw")
    a.add_argument("--max-cycle", type=int, default=DEFAULT_MAX_CYCLE)
    a.add_argument("--format", choices=["table", "json", "csv"], default="table")
    a.add_argument("--include-witness", action="store_true")
    a.add_argument("--jobs", type=int, default=1, help="files analyzed in parallel")
    a.set_defaults(func=cmd_analyze)

    o = sub.add_parser("oracle-check", help="compare the engines against brute force")
    o.add_argument("path")
    o.add_argument("--lockset", choices=["to", "lw", "ro", "hb", "all"], default="all")
    o.add_argument("--max-events", type=int, default=None)
    o.set_defaults(func=cmd_oracle_check)

    g = sub.add_parser("generate", help="write a seeded synthetic trace")
    g.add_argument("--events", type=int, default=1000)
    g.add_argument("--threads", type=int, default=4)
    g.add_argument("--locks", type=int, default=4)
    g.add_argument("--vars", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--deadlock-bias", type=float, default=0.1)
    g.add_argument("-o", "--output", default=None)
    g.set_defaults(func=cmd_generate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
