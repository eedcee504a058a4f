"""Signedness of an overflow sink from string conversion provenance or branch slicing."""

from __future__ import annotations

import enum

from ..vm.flags import AMBIGUOUS_JUMPS, SIGNED_JUMPS, UNSIGNED_JUMPS


class Signedness(enum.Enum):
    Signed = "signed"
    Unsigned = "unsigned"
    Unknown = "unknown"


def from_provenance(vars_, provenance: dict[str, str]) -> Signedness | None:
    """Signed for strtol-family values, unsigned for strtoul-family values."""
    kinds = {provenance[v] for v in vars_ if v in provenance}
    if kinds == {"signed"}:
        return Signedness.Signed
    if kinds == {"unsigned"}:
        return Signedness.Unsigned
    return None


def backward_slice_signedness(vars_, callsites, path) -> Signedness:
    """Walk the path backwards to the last relevant branch in a live frame."""
    vars_ = set(vars_)
    for c in reversed(path):
        if c.kind != "branch" or not (c.vars & vars_):
            continue
        if c.callsite not in callsites:
            continue
        if c.mnemonic in SIGNED_JUMPS:
            return Signedness.Signed
        if c.mnemonic in UNSIGNED_JUMPS:
            return Signedness.Unsigned
        if c.mnemonic in AMBIGUOUS_JUMPS:
            continue
    return Signedness.Unknown


def detect_signedness(sink, callsites, path, provenance: dict[str, str] | None = None):
    """(Signedness, evidence) where evidence is strto-family, branch-slicing or none."""
    vars_ = sink.vars
    known = from_provenance(vars_, provenance or {})
    if known is not None:
        return known, "strto-family"
    s = backward_slice_signedness(vars_, callsites, path)
    return s, ("none" if s is Signedness.Unknown else "branch-slicing")
