"""Run test cases through the engine and verify generated inputs."""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..concolic import Config, execute_concolic
from ..secpred import verify_report
from ..smt.solver import BackendFailure
from ..vm import AsmError, VMError, assemble_file
from .cases import TestCase, load_manifest
from .metrics import SuiteMetrics, Verdict

log = logging.getLogger(__name__)


def run_case(case: TestCase, config: Config | None = None, verifier=verify_report) -> Verdict:
    """Analyze one case, then re-run every generated input in checked mode."""
    config = config or Config()
    try:
        program = assemble_file(case.program)
        data = case.input_bytes()
        _, _, reports = execute_concolic(program, data, config)
        for r in reports:
            verifier(program, r, config.budget, case.expected_traps or None)
    except (AsmError, VMError, BackendFailure, OSError) as e:
        log.warning("%s errored: %s", case.id, e)
        return Verdict(case.id, case.cwe, case.positive, error=f"{type(e).__name__}: {e}")
    return Verdict.from_reports(case.id, case.cwe, case.positive, reports)


def _run_one(args):
    case, config = args
    return run_case(case, config)


def run_cases(cases: list[TestCase], config: Config | None = None, workers: int = 1) -> list[Verdict]:
    """Verdicts in manifest order; workers > 1 runs cases in separate processes.

    Workers are capped at the CPU count: oversubscription pushes solver
    queries past their wall-clock timeout and changes verdicts.
    """
    config = config or Config()
    workers = min(workers, os.cpu_count() or 1)
    jobs = [(c, config) for c in cases]
    if workers <= 1 or len(cases) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def run_suite(manifest: str | Path | list, config: Config | None = None, workers: int = 1):
    """Returns (metrics, verdicts) for a manifest path or an already loaded case list."""
    cases = manifest if isinstance(manifest, list) else load_manifest(manifest)
    verdicts = run_cases(cases, config, workers)
    return SuiteMetrics.from_verdicts(verdicts), verdicts


def write_results(metrics: SuiteMetrics, verdicts: list[Verdict], out: str | Path) -> tuple[Path, Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "table.txt"
    table.write_text(metrics.table() + "\n")
    data = metrics.to_dict()
    data["cases"] = [v.to_dict() for v in verdicts]
    js = out / "metrics.json"
    js.write_text(json.dumps(data, indent=2) + "\n")
    return table, js
