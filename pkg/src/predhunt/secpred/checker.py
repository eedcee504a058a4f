"""Security predicate checks driven by a concolic session."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from ..concolic.slicing import generate_input, slice_path
from ..smt import expr as E
from ..smt.analysis import contains_subtree, find_extract_nodes
from ..smt.expr import Expr
from ..smt.smtlib import emit_smtlib
from ..smt.solver import BackendFailure, Verdict
from ..vm.isa import NULL_PAGE_END, STACK_TOP, Imm
from .bounds import bounds_for, in_stack
from .predicates import overflow_predicates
from .report import ErrorReport, site_hash
from .shadow import FreeUnknown, ShadowHeap, ShadowStack
from .signedness import Signedness, detect_signedness

log = logging.getLogger(__name__)

BITMAP_BITS = 1 << 20
MAX_SOURCES = 64
NEAR_MISS = 16  # bytes past a bound that land in an unmapped guard gap
SOURCE_OPS = {"add", "adc", "sub", "sbb", "mul", "imul", "shl", "sal", "neg"}
ALLOC_FNS = {"malloc": (0,), "calloc": (0, 1), "realloc": (1,)}
COPY_FNS = {"memcpy": (2,), "memmove": (2,), "memset": (2,), "strncpy": (2,)}


@dataclass(frozen=True)
class OverflowSource:
    address: int
    kind: str
    width: int
    result: Expr
    unsigned: Expr
    signed: Expr
    op: tuple = ()  # (mnemonic, a, b, cin) the predicates were built from

    def narrowed(self, width: int) -> "OverflowSource":
        """Predicates rebuilt for the low ``width`` bits of the operands."""
        mn, a, b, cin = self.op
        lo_a = E.extract(a, width - 1, 0)
        lo_b = E.extract(b, width - 1, 0) if b is not None else None
        unsigned, signed = overflow_predicates(mn, lo_a, lo_b, cin)
        return replace(self, width=width, unsigned=unsigned, signed=signed)


def mark_overflow_source(inst, mn: str, a: Expr, b: Expr | None, cin: Expr | None, r: Expr):
    """An overflow source for a flag-setting arithmetic instruction with symbolic operands."""
    if mn not in SOURCE_OPS or not r.symbolic:
        return None
    kind = {"shl": "shl-sal", "sal": "shl-sal", "adc": "adc-final", "sbb": "sbb-final"}.get(mn, mn)
    pmn, pb = mn, b
    ops = inst.operands if inst is not None else ()
    if mn == "add" and len(ops) > 1 and isinstance(ops[1], Imm) and b.value >> (b.width - 1):
        # adding a negative constant is a subtraction for overflow purposes
        pmn, pb, kind = "sub", E.neg(b), "add-neg-const"
    unsigned, signed = overflow_predicates(pmn, a, pb, cin)
    address = inst.address if inst is not None else 0
    return OverflowSource(address, kind, a.width, r, unsigned, signed, (pmn, a, pb, cin))


@dataclass
class DedupState:
    bits: bytearray = field(default_factory=lambda: bytearray(BITMAP_BITS // 8))
    memo: dict = field(default_factory=dict)

    @staticmethod
    def index(family: str, source: int, sink: int) -> int:
        return site_hash(family, source, sink) % BITMAP_BITS

    def is_set(self, family, source, sink) -> bool:
        i = self.index(family, source, sink)
        return bool(self.bits[i >> 3] >> (i & 7) & 1)

    def set(self, family, source, sink):
        i = self.index(family, source, sink)
        self.bits[i >> 3] |= 1 << (i & 7)

    def remember_unsat(self, site, index: int):
        self.memo[site] = min(index, self.memo.get(site, index))

    def memoized(self, site, index: int) -> bool:
        k = self.memo.get(site)
        return k is not None and k <= index


def dedup_and_memo(dedup: DedupState, kind: str, source: int, sink: int) -> str:
    """Test-and-set the bitmap bit of a site."""
    if dedup.is_set(kind, source, sink):
        return "Duplicate"
    dedup.set(kind, source, sink)
    return "Fresh"


class Checker:
    """Builds and solves security predicates at the sinks a session encounters."""

    def __init__(self, session):
        self.session = session
        self.heap = ShadowHeap()
        self.stack = ShadowStack([STACK_TOP - 8])
        self.dedup = DedupState()
        self.sources: list[OverflowSource] = []
        self.reports: list[ErrorReport] = []
        self.skipped = 0

    @property
    def active(self):
        return self.session.config.predicates

    # shadow state ---------------------------------------------------------

    def on_call(self, slot: int):
        self.stack.on_call(slot)

    def on_ret(self, sp: int):
        self.stack.on_ret(sp)

    def update_shadow(self, ev):
        name, args, ret = ev.name, ev.args, ev.ret
        try:
            if name in ("malloc", "calloc") and ret:
                self.heap.insert(ret, args[0] if name == "malloc" else args[0] * args[1])
            elif name == "realloc" and ret:
                if args[0]:
                    self.heap.remove(args[0])
                self.heap.insert(ret, args[1])
            elif name == "free" and args[0]:
                self.heap.remove(args[0])
        except FreeUnknown as exc:
            self.session.trace.note(type(exc).__name__, ev.inst.address, detail=str(exc))

    # solving --------------------------------------------------------------

    def _query(self, seed_vars, conds: list[Expr]):
        path = self.session.path
        assertions = [c.constraint for c in slice_path(path, seed_vars)] + list(conds)
        try:
            return self.session.solver.solve(assertions), assertions
        except BackendFailure as exc:
            self.session.trace.note("solver-failure", None, detail=str(exc))
            return Verdict.Unknown(str(exc)), assertions

    def _ladder(self, seed_vars, rungs: list[list[Expr]]):
        """First satisfiable rung as (verdict, assertions, rung index), else (None, None, None)."""
        for i, conds in enumerate(rungs):
            extra = set().union(*(c.vars for c in conds)) if conds else set()
            verdict, assertions = self._query(set(seed_vars) | extra, conds)
            if verdict.sat:
                return verdict, assertions, i
        return None, None, None

    def _fresh(self, family: str, source: int, sink: int) -> bool:
        if self.dedup.is_set(family, source, sink):
            return False
        if self.dedup.memoized((family, source, sink), len(self.session.path)):
            self.skipped += 1
            return False
        return True

    def _fail(self, family: str, source: int, sink: int):
        self.dedup.remember_unsat((family, source, sink), len(self.session.path))

    def _emit(self, family: str, kind: str, source: int, sink: int, verdict, assertions, **extra):
        self.dedup.set(family, source, sink)
        report = ErrorReport(kind, source, sink, input=generate_input(verdict.model, self.session.input),
                             predicate=list(assertions), **extra)
        if self.session.config.emit_smt:
            report.smt = emit_smtlib(assertions)
        self.reports.append(report)
        log.info("report %s at %#x", kind, sink)
        return report

    # null, division, bounds ----------------------------------------------

    def on_memory(self, inst, addr: Expr, concrete: int, access: str, value_symbolic: bool, size: int):
        if "null" in self.active:
            self.check_null_deref(inst, addr)
        if "oob" in self.active:
            self.check_oob(inst, addr, concrete, access, value_symbolic)
        if "overflow" in self.active:
            self.check_overflow_sink(inst, addr, "mem-address")

    def check_null_deref(self, inst, addr: Expr):
        site = ("null", inst.address, inst.address)
        if not self._fresh(*site):
            return None
        zero = E.bv(0, addr.width)
        rungs = [[E.eq(addr, zero)], [E.ult(addr, E.bv(NULL_PAGE_END, addr.width))]]
        verdict, assertions, _ = self._ladder(addr.vars, rungs)
        if verdict is None:
            self._fail(*site)
            return None
        return self._emit("null", "NullDeref", inst.address, inst.address, verdict, assertions)

    def on_div(self, inst, divisor: Expr):
        if "div" in self.active:
            self.check_div_zero(inst, divisor)
        if "overflow" in self.active:
            self.check_overflow_sink(inst, divisor, "branch")

    def check_div_zero(self, inst, divisor: Expr):
        site = ("div", inst.address, inst.address)
        if not self._fresh(*site):
            return None
        verdict, assertions, _ = self._ladder(divisor.vars, [[E.eq(divisor, E.bv(0, divisor.width))]])
        if verdict is None:
            self._fail(*site)
            return None
        return self._emit("div", "DivByZero", inst.address, inst.address, verdict, assertions)

    def check_oob(self, inst, addr: Expr, concrete: int, access: str, value_symbolic: bool):
        site = ("oob", inst.address, inst.address)
        if not self._fresh(*site):
            return None
        b = bounds_for(concrete, addr, self.heap, self.stack)
        if b.empty:
            self.session.trace.note("no-bounds", inst.address)
            return None
        w = addr.width
        c = lambda v: E.bv(v, w)  # noqa: E731
        outside, near = [], []
        if b.lower is not None:
            outside.append(E.ult(addr, c(b.lower)))
            near.append(E.land(E.uge(addr, c(max(b.lower - NEAR_MISS, 0))), E.ult(addr, c(b.lower))))
        if b.upper is not None:
            outside.append(E.uge(addr, c(b.upper)))
            near.append(E.land(E.uge(addr, c(b.upper)), E.ult(addr, c(b.upper + NEAR_MISS))))
        pred = E.lor(*outside) if len(outside) > 1 else outside[0]
        if access == "write" and in_stack(concrete) and b.upper in self.stack:
            strong = E.eq(addr, c(b.upper))  # overwrite the return address
        else:
            strong = E.slt(addr, c(0))  # negative address
        near_pred = E.lor(*near) if len(near) > 1 else near[0]
        rungs = [[pred, strong], [near_pred], [pred]]
        verdict, assertions, rung = self._ladder(addr.vars, rungs)
        if verdict is None:
            self._fail(*site)
            return None
        if access == "write" and value_symbolic:
            kind = "WriteWhatWhere"
        else:
            kind = "OutOfBoundsWrite" if access == "write" else "OutOfBoundsRead"
        return self._emit("oob", kind, inst.address, inst.address, verdict, assertions,
                          precondition_used=rung == 0)

    def check_copy_size(self, inst, name: str, arg_exprs, args):
        size = arg_exprs[COPY_FNS[name][0]]
        if size is None:
            return None
        site = ("copy", inst.address, inst.address)
        if not self._fresh(*site):
            return None
        dst = args[0]
        b = bounds_for(dst, arg_exprs[0], self.heap, self.stack)
        if b.upper is None or b.upper <= dst:
            self.session.trace.note("no-bounds", inst.address, name=name)
            return None
        room = b.upper - dst
        pred = E.ugt(size, E.bv(room, size.width))
        rungs = [[pred, E.ule(size, E.bv(room + NEAR_MISS, size.width))], [pred]]
        verdict, assertions, _ = self._ladder(size.vars, rungs)
        if verdict is None:
            self._fail(*site)
            return None
        return self._emit("copy", "CopySizeOverflow", inst.address, inst.address, verdict, assertions)

    # integer overflow -----------------------------------------------------

    def on_arith(self, inst, mn: str, a: Expr, b: Expr | None, cin: Expr | None, r: Expr):
        if "overflow" not in self.active:
            return None
        if mn in ("adc", "sbb"):
            # only the final instruction of a wide add/sub pair is a source
            prev = self.session.prev_inst
            low = "add" if mn == "adc" else "sub"
            if prev is None or prev.mnemonic != low or prev.next_address != inst.address:
                return None
            self.sources = [s for s in self.sources if s.address != prev.address]
        src = mark_overflow_source(inst, mn, a, b, cin, r)
        if src is not None:
            self.sources = [s for s in self.sources if s.address != src.address][-(MAX_SOURCES - 1):]
            self.sources.append(src)
        return src

    def on_branch_sink(self, inst, flag_src):
        if "overflow" not in self.active or not self.sources:
            return
        _, a, b, _, _ = flag_src
        for operand in (a, b):
            if operand is not None and operand.symbolic:
                self.check_overflow_sink(inst, operand, "branch")

    def on_call_args(self, inst, name: str, arg_exprs, args):
        if "copy" in self.active and name in COPY_FNS:
            self.check_copy_size(inst, name, arg_exprs, args)
        if "overflow" not in self.active or not self.sources:
            return
        if name in ALLOC_FNS or name in COPY_FNS:
            for i in (ALLOC_FNS.get(name) or COPY_FNS[name]):
                if arg_exprs[i] is not None:
                    kind = "alloc" if name in ALLOC_FNS else "copy"
                    self.check_overflow_sink(inst, arg_exprs[i], kind, args[i])
        else:
            for i in range(3):
                if arg_exprs[i] is not None:
                    self.check_overflow_sink(inst, arg_exprs[i], "fn-arg")

    def _variants(self, sink: Expr):
        for src in reversed(self.sources):
            if not src.result.vars <= sink.vars:
                continue
            found = []
            for node, lo, hi in find_extract_nodes(sink, src.result):
                if lo == 0 and hi + 1 < src.width and node.args[0] is src.result and src.op[1] is not None:
                    found.append(src.narrowed(hi + 1))
            if contains_subtree(sink, src.result):
                found.append(src)
            if found:
                yield src, list({v.width: v for v in found}.values())

    def check_overflow_sink(self, inst, sink: Expr, sink_kind: str, concrete: int | None = None):
        """Overflow reports for every source whose result reaches ``sink``."""
        if not sink.symbolic:
            return []
        session = self.session
        out = []
        for src, variants in self._variants(sink):
            family = "overflow"
            if not self._fresh(family, src.address, inst.address):
                continue
            signedness, evidence = detect_signedness(sink, session.calls.callsites(), session.path,
                                                     session.provenance)
            pre = None
            if sink_kind == "alloc" and concrete is not None:
                pre = E.land(E.ne(sink, E.bv(0, sink.width)), E.ult(sink, E.bv(concrete, sink.width)))
            elif sink_kind == "copy" and concrete is not None:
                pre = E.ugt(sink, E.bv(concrete, sink.width))
            found = []
            for v in variants:
                found = self._solve_overflow(v, sink, signedness, pre)
                if found:
                    break
            if not found:
                self._fail(family, src.address, inst.address)
                continue
            for kind, verdict, assertions, used, flags, width in found:
                watch = [f"{src.address:#x}:{f}" + (f":{width}" if width != src.width else "") for f in flags]
                out.append(self._emit(family, kind, src.address, inst.address, verdict, assertions,
                                      signedness_evidence=evidence, precondition_used=used, watch=watch))
        return out

    def _solve_overflow(self, src: OverflowSource, sink: Expr, signedness: Signedness, pre):
        seeds = sink.vars | src.result.vars

        def attempt(preds):
            rungs = [preds + [pre], preds] if pre is not None else [preds]
            verdict, assertions, rung = self._ladder(seeds, rungs)
            return (verdict, assertions, pre is not None and rung == 0) if verdict else None

        if signedness is Signedness.Signed:
            hit = attempt([src.signed])
            return [("IntOverflowSigned", *hit, ["OF"], src.width)] if hit else []
        if signedness is Signedness.Unsigned:
            hit = attempt([src.unsigned])
            return [("IntOverflowUnsigned", *hit, ["CF"], src.width)] if hit else []
        both = attempt([src.signed, src.unsigned])
        if both:
            return [("IntOverflowBoth", *both, ["CF", "OF"], src.width)]
        signed, unsigned = attempt([src.signed]), attempt([src.unsigned])
        if signed and unsigned:
            return [("IntOverflowSigned", *signed, ["OF"], src.width),
                    ("IntOverflowUnsigned", *unsigned, ["CF"], src.width)]
        return []  # a single-sided overflow of unknown signedness is not reported
