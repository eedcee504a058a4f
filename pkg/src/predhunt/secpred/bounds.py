"""Buffer bounds for symbolic addresses."""

from __future__ import annotations

from dataclasses import dataclass

from ..smt.expr import K, Expr, mask, to_signed
from ..vm.isa import STACK_BASE, STACK_TOP
from .shadow import ShadowHeap, ShadowStack

FOLD_LIMIT = 4096  # largest negative displacement folded into a frame base


class NoConcretePart(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    lower: int | None
    upper: int | None
    provenance: str  # heap | stack | global-heuristic

    def __post_init__(self):
        if self.lower is not None and self.upper is not None and self.lower >= self.upper:
            raise ValueError("lower bound must be below upper bound")
        if self.provenance == "heap" and (self.lower is None or self.upper is None):
            raise ValueError("heap bounds need both ends")

    @property
    def empty(self) -> bool:
        return self.lower is None and self.upper is None


def _top_terms(e: Expr) -> list[tuple[Expr, bool]]:
    """Top-level additive terms as (term, negated)."""
    if e.kind is K.ZeroExtend:
        e = e.args[0]
    if e.kind is K.Add:
        return [(a, False) for a in e.args]
    if e.kind is K.Sub:
        return [(e.args[0], False), (e.args[1], True)]
    return [(e, False)]


def _offset_free(e: Expr) -> bool:
    """True when a symbolic term carries no constant displacement of its own."""
    while e.kind in (K.ZeroExtend, K.SignExtend) or (e.kind is K.Mul and any(a.is_const for a in e.args)):
        e = next(a for a in e.args if not a.is_const) if e.kind is K.Mul else e.args[0]
    if e.kind in (K.Add, K.Sub):
        return not any(a.is_const for a in e.args)
    return True


def concrete_base_heuristic(addr: Expr) -> int:
    """Sum of the concrete parts of an address expression.

    Small negative constants belong to the base only when every symbolic term
    is a bare index; otherwise they are treated as part of the index.
    """
    w = addr.width
    consts, negatives, symbolic = [], [], []
    for term, negated in _top_terms(addr):
        if term.is_const:
            v = (-term.value if negated else term.value) & mask(w)
            s = to_signed(v, w)
            (negatives if -FOLD_LIMIT <= s < 0 else consts).append(v)
        else:
            symbolic.append(term)
    if not consts and not negatives:
        raise NoConcretePart("address has no concrete part")
    total = sum(consts)
    if all(_offset_free(t) for t in symbolic):
        total += sum(negatives)
    return total & mask(w)


def in_stack(addr: int) -> bool:
    return STACK_BASE <= addr < STACK_TOP


def bounds_for(concrete: int, addr: Expr | None, heap: ShadowHeap, stack: ShadowStack) -> Bounds:
    """Bounds of the buffer an access at ``concrete`` belongs to (either end may be unknown)."""
    try:
        base = concrete_base_heuristic(addr) if addr is not None else None
    except NoConcretePart:
        base = None
    for probe in (concrete, base):
        hit = heap.lookup(probe) if probe is not None else None
        if hit is not None:
            return Bounds(hit[0], hit[0] + hit[1], "heap")
    if in_stack(concrete):
        upper = stack.upper_for(concrete)
        lower = base if base is not None and in_stack(base) else None
        if lower is not None and upper is not None and lower >= upper:
            lower = None
        return Bounds(lower, upper, "stack")
    return Bounds(base, None, "global-heuristic")
