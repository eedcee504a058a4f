"""Command line entry point: run, analyze, invert and suite."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .concolic import PREDICATES, Config, Session, invert_all
from .harness import ManifestError, bundled_manifest, load_manifest, run_suite, write_results
from .secpred import verify_report
from .semantics import list_models
from .smt.solver import DEFAULT_TIMEOUT_MS, BackendFailure
from .vm import AsmError, VMError, Watchpoint, assemble_file, run

EXIT_OK, EXIT_ERROR, EXIT_TRAP, EXIT_NO_REPORTS = 0, 1, 2, 3

log = logging.getLogger("predhunt")


class UsageError(Exception):
    pass


def parse_predicates(text: str | None) -> frozenset:
    if text is None:
        return frozenset(PREDICATES)
    if text.strip().lower() in ("", "none"):
        return frozenset()
    names = {p.strip() for p in text.split(",") if p.strip()}
    if "all" in names:
        return frozenset(PREDICATES)
    return frozenset(names)


def make_config(args, default_predicates: str | None = None) -> Config:
    preds = args.predicates if args.predicates is not None else default_predicates
    try:
        return Config(predicates=parse_predicates(preds), models=not getattr(args, "no_models", False),
                      timeout_ms=args.timeout_ms, solver=args.solver, emit_smt=getattr(args, "emit_smt", False))
    except ValueError as e:
        raise UsageError(str(e)) from e


def _load(program: str, input_path: str):
    return assemble_file(program), Path(input_path).read_bytes()


def session_report(input_file: str, path, trace, reports, verdicts=None, accuracy=None) -> dict:
    """Machine-readable summary of one session."""
    out = {
        "input_file": input_file,
        "outcome": trace.outcome.to_json() if trace.outcome else None,
        "path_size": len(path),
        "branch_constraints": len(path.branches()),
        "branches": [{"index": c.index, "address": hex(c.address), "taken": c.taken}
                     for c in path.branches()],
        "reports": [r.to_dict() for r in reports],
    }
    if verdicts is not None:
        out["inversions"] = [v.to_dict() for v in verdicts]
        out["accuracy"] = accuracy
    return out


def cmd_run(args) -> int:
    program, data = _load(args.program, args.input)
    watch = [Watchpoint.parse(w) for w in args.watch]
    mode = "checked" if args.checked or watch else "plain"
    result = run(program, data, mode, watch)
    print(result.dumps())
    return EXIT_TRAP if result.trapped else EXIT_OK


def cmd_analyze(args) -> int:
    config = make_config(args)
    program, data = _load(args.program, args.input)
    path, trace, reports = Session(program, data, config).run()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    counts: dict = {}
    for r in reports:
        n = counts.get(r.site, 0)
        counts[r.site] = n + 1
        stem = f"{r.site}_{n}"
        (out / f"{stem}.bin").write_bytes(r.input)
        r.input_file = f"{stem}.bin"
        if r.smt is not None:
            (out / f"{stem}.smt2").write_text(r.smt)
            r.smt_file = f"{stem}.smt2"
        if args.verify:
            verify_report(program, r, config.budget)
    summary = session_report(args.input, path, trace, reports)
    (out / "session.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK if reports else EXIT_NO_REPORTS


def cmd_invert(args) -> int:
    config = make_config(args, default_predicates="none")
    program, data = _load(args.program, args.input)
    session = Session(program, data, config)
    path, trace, reports = session.run()
    verdicts, accuracy = invert_all(program, data, path, trace.outcome.branches, session.solver, config.budget)
    print(f"{'#':>4} {'address':>10} {'taken':>6} {'status':>8} {'flip':>6}")
    for v in verdicts:
        flip = "-" if v.accurate is None else ("ok" if v.accurate else "miss")
        print(f"{v.trace_index:>4} {v.address:>#10x} {str(v.taken):>6} {v.status:>8} {flip:>6}")
    print(f"branches: {len(verdicts)}  path constraints: {len(path)}")
    print("accuracy: " + ("n/a" if accuracy is None else f"{accuracy:.2f}%"))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for v in verdicts:
            if v.input is not None:
                (out / f"branch_{v.trace_index}.bin").write_bytes(v.input)
        summary = session_report(args.input, path, trace, reports, verdicts, accuracy)
        (out / "session.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_suite(args) -> int:
    config = make_config(args)
    manifest = args.manifest or bundled_manifest()
    cases = load_manifest(manifest)
    metrics, verdicts = run_suite(cases, config, args.workers)
    print(metrics.table())
    if args.out:
        write_results(metrics, verdicts, args.out)
    if metrics.errored and args.strict:
        return EXIT_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--solver", default=None, help="builtin or external:<path> (PREDHUNT_SOLVER overrides)")
    common.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)
    common.add_argument("--predicates", default=None, help=f"comma list of {','.join(PREDICATES)}, all or none")
    common.add_argument("--no-models", action="store_true", help="trace library calls instead of modeling them")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="predhunt", description=__doc__)
    p.add_argument("--list-models", action="store_true", help="list modeled library functions and exit")
    sub = p.add_subparsers(dest="command")

    r = sub.add_parser("run", help="execute a program", parents=[common])
    r.add_argument("program")
    r.add_argument("input")
    r.add_argument("--checked", action="store_true")
    r.add_argument("--watch", action="append", default=[], metavar="ADDR:FLAG[:WIDTH]")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="concolic session with security predicates", parents=[common])
    a.add_argument("program")
    a.add_argument("input")
    a.add_argument("--out", default="out")
    a.add_argument("--emit-smt", action="store_true")
    a.add_argument("--no-verify", dest="verify", action="store_false")
    a.set_defaults(func=cmd_analyze)

    i = sub.add_parser("invert", help="invert every symbolic branch", parents=[common])
    i.add_argument("program")
    i.add_argument("input")
    i.add_argument("--order", choices=["direct"], default="direct")
    i.add_argument("--out", default=None)
    i.set_defaults(func=cmd_invert)

    s = sub.add_parser("suite", help="score a test-case manifest", parents=[common])
    s.add_argument("manifest", nargs="?", default=None)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", default=None)
    s.add_argument("--strict", dest="strict", action="store_true", default=True)
    s.add_argument("--no-strict", dest="strict", action="store_false")
    s.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list_models:
        for name, treatment in list_models():
            print(f"{name:10s} {treatment}")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_ERROR
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ManifestError, AsmError, BackendFailure, VMError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
