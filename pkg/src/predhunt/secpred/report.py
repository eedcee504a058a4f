"""Error reports and their checked-mode verification."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from ..vm.machine import VMError, Watchpoint, run
from ..vm.isa import Program

REPORT_KINDS = (
    "NullDeref", "DivByZero", "OutOfBoundsRead", "OutOfBoundsWrite", "WriteWhatWhere",
    "IntOverflowSigned", "IntOverflowUnsigned", "IntOverflowBoth", "CopySizeOverflow",
)
MEMORY_KINDS = {"NullDeref", "OutOfBoundsRead", "OutOfBoundsWrite", "WriteWhatWhere", "CopySizeOverflow"}
OVERFLOW_KINDS = {"IntOverflowSigned", "IntOverflowUnsigned", "IntOverflowBoth"}
MEMORY_TRAPS = {"NullDeref", "OutOfBounds", "StackSmash"}


def site_hash(family: str, source: int, sink: int) -> int:
    """Stable 64-bit hash of an error site."""
    digest = hashlib.blake2b(f"{family}:{source:#x}:{sink:#x}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class ErrorReport:
    kind: str
    source_addr: int
    sink_addr: int
    signedness_evidence: str = "none"
    precondition_used: bool = False
    input: bytes = b""
    input_file: str | None = None
    verification: str = "unverified"
    smt: str | None = None
    smt_file: str | None = None
    watch: list[str] = field(default_factory=list)
    predicate: list = field(default_factory=list, repr=False, compare=False)  # solved assertions

    def __post_init__(self):
        if self.kind not in REPORT_KINDS:
            raise ValueError(f"unknown report kind {self.kind}")

    @property
    def site(self) -> str:
        return f"{site_hash(self.kind, self.source_addr, self.sink_addr):016x}"

    def watchpoints(self) -> list[Watchpoint]:
        return [Watchpoint.parse(w) for w in self.watch]

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "source_addr": hex(self.source_addr),
            "sink_addr": hex(self.sink_addr),
            "signedness_evidence": self.signedness_evidence,
            "precondition_used": self.precondition_used,
            "input_file": self.input_file,
            "verification": self.verification,
        }
        if self.smt_file:
            d["smt_file"] = self.smt_file
        return d


def trap_matches(report: ErrorReport, trap) -> bool:
    if trap is None:
        return False
    if report.kind == "DivByZero":
        return trap.kind == "DivByZero" and trap.address == report.sink_addr
    if report.kind in MEMORY_KINDS:
        return trap.kind in MEMORY_TRAPS and trap.address == report.sink_addr
    # an overflow shows as the watchpoint firing or as the memory error it causes
    return (trap.kind == "OverflowWatch" and trap.address == report.source_addr) or trap.kind in MEMORY_TRAPS


def verify_report(program: Program, report: ErrorReport, budget: int | None = None,
                  expected: frozenset | None = None) -> str:
    """Re-run the generated input in checked mode; sets and returns the verification status.

    With ``expected`` the trap kind must also be one of those kinds.
    """
    kwargs = {"budget": budget} if budget else {}
    try:
        result = run(program, report.input, "checked", report.watchpoints(), **kwargs)
        ok = trap_matches(report, result.trap)
        if ok and expected:
            ok = result.trap.kind in expected
    except VMError:
        ok = False
    report.verification = "verified" if ok else "refuted"
    return report.verification
