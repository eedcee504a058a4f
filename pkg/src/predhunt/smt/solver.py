"""Solver backends: hermetic brute force and an external SMT-LIB2 process."""

from __future__ import annotations

import itertools
import logging
import os
import shutil
import subprocess
from dataclasses import dataclass, field
from typing import Sequence

from .analysis import compile_exprs, evaluate, variables
from .expr import TRUE, Expr
from .smtlib import SmtParseError, emit_smtlib, parse_response

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT_MS = 10_000
BRUTE_FORCE_BITS = 24


class BackendFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Verdict:
    status: str  # "sat" | "unsat" | "unknown"
    model: dict[str, int] | None = None
    reason: str | None = None

    @property
    def sat(self) -> bool:
        return self.status == "sat"

    @property
    def unsat(self) -> bool:
        return self.status == "unsat"

    @property
    def unknown(self) -> bool:
        return self.status == "unknown"

    @classmethod
    def Sat(cls, model):
        return cls("sat", dict(model))

    @classmethod
    def Unsat(cls):
        return cls("unsat")

    @classmethod
    def Unknown(cls, reason: str):
        return cls("unknown", reason=reason)


def _compile(assertions: Sequence[Expr], names: list[str]):
    """Turn a conjunction into a Python predicate over the variables, for brute force."""
    fn = compile_exprs(assertions, names)
    return lambda *values: all(v == 1 for v in fn(*values))


class BuiltinBackend:
    """Exhaustive search; only for formulas with few variable bits."""

    name = "builtin"

    def __init__(self, max_bits: int = BRUTE_FORCE_BITS):
        self.max_bits = max_bits

    def check(self, assertions: Sequence[Expr], timeout_ms: int) -> Verdict:
        decls: dict[str, int] = {}
        for a in assertions:
            decls.update(variables(a))
        names = sorted(decls)
        if sum(decls.values()) > self.max_bits:
            return Verdict.Unknown("resource")
        pred = _compile(assertions, names)
        for values in itertools.product(*(range(1 << decls[n]) for n in names)):
            if pred(*values):
                return Verdict.Sat(dict(zip(names, values)))
        return Verdict.Unsat()


class ExternalBackend:
    """Any QF_BV-capable solver that reads SMT-LIB2 from stdin."""

    def __init__(self, path: str, args: Sequence[str] | None = None):
        resolved = shutil.which(path) or path
        if not os.path.exists(resolved):
            raise BackendFailure(f"solver binary not found: {path}")
        self.path = resolved
        base = os.path.basename(resolved)
        if args is None:
            if base.startswith("z3"):
                args = ["-in", "-smt2"]
            elif base.startswith("cvc"):
                args = ["--lang", "smt2"]
            else:
                args = []
        self.args = list(args)
        self.name = f"external:{resolved}"

    def run_script(self, script: str, timeout_ms: int) -> str:
        cmd = [self.path, *self.args]
        if os.path.basename(self.path).startswith("z3"):
            cmd.append(f"-t:{timeout_ms}")
        try:
            proc = subprocess.run(
                cmd, input=script, capture_output=True, text=True, timeout=timeout_ms / 1000 + 2
            )
        except subprocess.TimeoutExpired:
            raise TimeoutError from None
        except OSError as exc:
            raise BackendFailure(f"cannot start solver: {exc}") from exc
        if proc.returncode not in (0, 1) and not proc.stdout.strip():
            raise BackendFailure(f"solver exited with {proc.returncode}: {proc.stderr[:200]}")
        return proc.stdout

    def check(self, assertions: Sequence[Expr], timeout_ms: int) -> Verdict:
        script = emit_smtlib(assertions)
        try:
            out = self.run_script(script, timeout_ms)
        except TimeoutError:
            return Verdict.Unknown("timeout")
        try:
            status, model = parse_response(out)
        except SmtParseError as exc:
            raise BackendFailure(str(exc)) from exc
        if status == "sat":
            return Verdict.Sat(model)
        if status == "unsat":
            return Verdict.Unsat()
        return Verdict.Unknown("timeout")


def find_external() -> str | None:
    return shutil.which("z3") or shutil.which("cvc5")


def make_backend(spec: str | None = None):
    """``builtin``, ``external:<path>`` or ``auto`` (external if one is on PATH)."""
    spec = os.environ.get("PREDHUNT_SOLVER") or spec or "auto"
    if spec == "builtin":
        return BuiltinBackend()
    if spec.startswith("external:"):
        return ExternalBackend(spec.split(":", 1)[1])
    if spec == "external":
        path = find_external()
        if path is None:
            raise BackendFailure("no external solver on PATH")
        return ExternalBackend(path)
    if spec == "auto":
        path = find_external()
        return ExternalBackend(path) if path else BuiltinBackend()
    raise ValueError(f"unknown solver backend {spec!r}")


@dataclass
class SolverStats:
    queries: int = 0
    cache_hits: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0


@dataclass
class Solver:
    """A single-owner solver session with a result cache and query counters."""

    backend: object = field(default_factory=make_backend)
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    stats: SolverStats = field(default_factory=SolverStats)

    def __post_init__(self):
        self._cache: dict[tuple, Verdict] = {}

    def solve(self, assertions: Sequence[Expr]) -> Verdict:
        assertions = [a for a in assertions if a is not TRUE]
        for a in assertions:
            if not a.is_bool:
                raise TypeError("assertions must be boolean-sorted")
        key = tuple(sorted(set(assertions), key=id))
        cached = self._cache.get(key)
        if cached is not None:
            self.stats.cache_hits += 1
            return cached
        self.stats.queries += 1
        if any(a.is_const and not a.value for a in assertions):
            verdict = Verdict.Unsat()
        else:
            verdict = self.backend.check(list(dict.fromkeys(assertions)), self.timeout_ms)
        if verdict.sat:
            verdict = self._complete(assertions, verdict)
        self._cache[key] = verdict
        if verdict.sat:
            self.stats.sat += 1
        elif verdict.unsat:
            self.stats.unsat += 1
        else:
            self.stats.unknown += 1
        return verdict

    @staticmethod
    def _complete(assertions, verdict: Verdict) -> Verdict:
        model = dict(verdict.model)
        for a in assertions:
            for name in variables(a):
                model.setdefault(name, 0)
        cache: dict = {}
        for a in assertions:
            if evaluate(a, model, cache) != 1:
                raise BackendFailure("solver model does not satisfy the query")
        return Verdict.Sat(model)


def solve(assertions: Sequence[Expr], timeout: int = DEFAULT_TIMEOUT_MS, backend=None) -> Verdict:
    return Solver(backend or make_backend(), timeout).solve(assertions)
