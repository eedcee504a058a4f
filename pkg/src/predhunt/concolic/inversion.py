"""Branch inversion in direct order and its accuracy check by re-execution."""

from __future__ import annotations

from dataclasses import dataclass

from ..smt import expr as E
from ..smt.solver import BackendFailure, Solver
from ..vm.isa import Program
from ..vm.machine import VMError, run
from .slicing import generate_input, slice_path
from .state import PathPredicate


@dataclass
class InversionResult:
    status: str  # new | unsat | unknown
    index: int
    address: int
    input: bytes | None = None

    @property
    def sat(self) -> bool:
        return self.status == "new"


def invert_branch(path: PathPredicate, index: int, solver: Solver, original: bytes) -> InversionResult:
    """Solve the slice before ``index`` together with the negated branch at ``index``."""
    if not 0 <= index < len(path):
        raise IndexError(f"no path constraint {index}")
    target = path[index]
    prior = slice_path(path[:index], target.vars)
    assertions = [c.constraint for c in prior] + [E.lnot(target.constraint)]
    try:
        verdict = solver.solve(assertions)
    except BackendFailure:
        return InversionResult("unknown", index, target.address)
    if verdict.sat:
        return InversionResult("new", index, target.address, generate_input(verdict.model, original))
    return InversionResult("unsat" if verdict.unsat else "unknown", index, target.address)


def flips_at(original: list, new: list, target: int) -> bool:
    """True when ``new`` follows ``original`` up to branch ``target`` and flips it there."""
    if target >= len(original) or target >= len(new):
        return False
    if [tuple(b) for b in new[:target]] != [tuple(b) for b in original[:target]]:
        return False
    addr, taken = original[target]
    return tuple(new[target]) == (addr, not taken)


def compute_accuracy(inversions: list, original: list) -> float | None:
    """Percent of satisfiable inversions whose new trace flips exactly the target branch.

    ``inversions`` holds (target trace index, new branch trace) for every
    satisfiable query; None when there were none.
    """
    if not inversions:
        return None
    good = sum(flips_at(original, trace, t) for t, trace in inversions)
    return 100.0 * good / len(inversions)


@dataclass
class BranchVerdict:
    index: int  # position in the path predicate
    trace_index: int
    address: int
    taken: bool
    status: str
    input: bytes | None = None
    accurate: bool | None = None

    def to_dict(self) -> dict:
        return {"index": self.index, "trace_index": self.trace_index, "address": hex(self.address),
                "taken": self.taken, "status": self.status, "accurate": self.accurate}


def invert_all(program: Program, original: bytes, path: PathPredicate, trace: list, solver: Solver,
               budget: int | None = None):
    """Invert every recorded VM branch in direct order; returns (verdicts, accuracy)."""
    verdicts, checked = [], []
    for c in path:
        if c.kind != "branch" or c.trace_index is None:
            continue
        res = invert_branch(path, c.index, solver, original)
        v = BranchVerdict(c.index, c.trace_index, c.address, bool(c.taken), res.status, res.input)
        if res.sat:
            try:
                kwargs = {"budget": budget} if budget else {}
                new_trace = run(program, res.input, "plain", **kwargs).branches
            except VMError:
                new_trace = []
            v.accurate = flips_at(trace, new_trace, c.trace_index)
            checked.append((c.trace_index, new_trace))
        verdicts.append(v)
    return verdicts, compute_accuracy(checked, trace)
