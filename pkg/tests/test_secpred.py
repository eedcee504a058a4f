import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predhunt.concolic import Config, PathPredicate, Session
from predhunt.secpred import (
    Bounds,
    DoubleFree,
    ErrorReport,
    FreeUnknown,
    ShadowHeap,
    ShadowStack,
    Signedness,
    backward_slice_signedness,
    bounds_for,
    concrete_base_heuristic,
    detect_signedness,
    overflow_predicates,
    site_hash,
    verify_report,
)
from predhunt.secpred.checker import DedupState, dedup_and_memo
from predhunt.smt import evaluate
from predhunt.smt import expr as E
from predhunt.vm import assemble, assemble_file

from conftest import needs_solver

X = E.var("b0", 32)


def path_of(*items):
    """items: (mnemonic, vars expr, callsite, kind)."""
    p = PathPredicate()
    for i, (mn, e, cs, kind) in enumerate(items):
        p.add(E.ne(e, E.bv(i + 1000, e.width)), 0x400000 + 4 * i, cs, mn, kind)
    return p


# signedness from backward slicing ---------------------------------------------

def test_signed_jump_gives_signed():
    p = path_of(("jl", X, None, "branch"))
    assert backward_slice_signedness(X.vars, {None}, p) is Signedness.Signed


def test_unsigned_jump_gives_unsigned():
    p = path_of(("jae", X, None, "branch"))
    assert backward_slice_signedness(X.vars, {None}, p) is Signedness.Unsigned


def test_jz_is_skipped_for_an_earlier_decisive_branch():
    p = path_of(("jb", X, None, "branch"), ("jz", X, None, "branch"), ("jnz", X, None, "branch"))
    assert backward_slice_signedness(X.vars, {None}, p) is Signedness.Unsigned


def test_exhausted_slice_is_unknown():
    other = E.var("b9", 32)
    p = path_of(("jz", X, None, "branch"), ("jl", other, None, "branch"))
    assert backward_slice_signedness(X.vars, {None}, p) is Signedness.Unknown


def test_branches_in_returned_frames_are_ignored():
    # the latest relevant branch ran in a callee that has since returned
    p = path_of(("jl", X, None, "branch"), ("jb", X, 0x400100, "branch"))
    assert backward_slice_signedness(X.vars, {None}, p) is Signedness.Signed
    assert backward_slice_signedness(X.vars, {None, 0x400100}, p) is Signedness.Unsigned


def test_model_constraints_are_not_branches():
    p = path_of(("jl", X, None, "model"))
    assert backward_slice_signedness(X.vars, {None}, p) is Signedness.Unknown


def test_conversion_provenance_wins():
    p = path_of(("jb", X, None, "branch"))
    assert detect_signedness(X, {None}, p, {"b0": "signed"}) == (Signedness.Signed, "strto-family")
    assert detect_signedness(X, {None}, p, {"b0": "unsigned"}) == (Signedness.Unsigned, "strto-family")
    assert detect_signedness(X, {None}, p) == (Signedness.Unsigned, "branch-slicing")
    assert detect_signedness(X, {None}, PathPredicate()) == (Signedness.Unknown, "none")


UNKNOWN_SIGN = """
.data
buf: .zero 16
.text
main:
    mov.64 r0, buf
    mov.64 r1, 1
    icall read
    mov.64 r9, buf
    load.8 r1, [r9 + 0]
{guard}
    add.32 r1, 0x7fffff80
    mov.64 r0, r1
    icall malloc
    mov.64 r0, 0
    ret
"""


@needs_solver
def test_single_sided_overflow_of_unknown_signedness_is_not_reported():
    # only the signed side can overflow and nothing says the value is signed
    _, _, reports = Session(assemble(UNKNOWN_SIGN.format(guard="")), b"\x05").run()
    assert reports == []


@needs_solver
def test_signed_evidence_enables_the_single_sided_report():
    guard = "    cmp.32 r1, 1000\n    jg out\nout:"
    _, _, reports = Session(assemble(UNKNOWN_SIGN.format(guard=guard)), b"\x05").run()
    assert [(r.kind, r.signedness_evidence) for r in reports] == [("IntOverflowSigned", "branch-slicing")]


# overflow predicates ----------------------------------------------------------

@settings(max_examples=300)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_overflow_predicates_at_width_32(a, b):
    x, y = E.var("x", 32), E.var("y", 32)
    m = {"x": a, "y": b}
    sa, sb = E.to_signed(a, 32), E.to_signed(b, 32)
    lo, hi = -(2**31), 2**31
    u, s = overflow_predicates("imul", x, y)
    assert evaluate(u, m) == (a * b >= 2**32)
    assert evaluate(s, m) == (not lo <= sa * sb < hi)
    u, s = overflow_predicates("add", x, y)
    assert evaluate(u, m) == (a + b >= 2**32)
    assert evaluate(s, m) == (not lo <= sa + sb < hi)


def test_shift_predicates_need_concrete_count():
    with pytest.raises(ValueError):
        overflow_predicates("shl", X, E.var("n", 32))


# shadow structures and bounds -------------------------------------------------

@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(1, 64), st.booleans()), max_size=20))
def test_shadow_heap_stays_disjoint(ops):
    heap, live, cursor = ShadowHeap(), [], 0x10000
    for size, free in ops:
        if free and live:
            base = live.pop(0)
            heap.remove(base)
            assert heap.lookup(base) is None
        else:
            heap.insert(cursor, size)
            live.append(cursor)
            assert heap.lookup(cursor + size - 1) == (cursor, size)
            cursor += size + 16
        assert heap.disjoint()


def test_shadow_heap_free_errors():
    heap = ShadowHeap()
    heap.insert(0x100, 8)
    heap.remove(0x100)
    with pytest.raises(DoubleFree):
        heap.remove(0x100)
    with pytest.raises(FreeUnknown):
        heap.remove(0x200)


def test_shadow_stack_tracks_return_slots():
    s = ShadowStack([0x1000])
    s.on_call(0xF00)
    s.on_call(0xE00)
    assert s.upper_for(0xE10) == 0xF00
    s.on_ret(0xE08)
    assert 0xE00 not in s and s.upper_for(0xE10) == 0xF00


def test_base_heuristic_folds_small_negatives_only_for_bare_indices():
    idx = E.zext(E.var("b0", 8), 56)
    assert concrete_base_heuristic(E.add(E.bv(0x5000, 64), idx, E.bv(-8 & 2**64 - 1, 64))) == 0x4FF8
    shifted = E.mul(E.add(idx, E.bv(3, 64)), E.bv(4, 64))
    assert concrete_base_heuristic(E.add(E.bv(0x5000, 64), shifted, E.bv(-8 & 2**64 - 1, 64))) == 0x5000


def test_bounds_prefer_the_heap_block():
    heap = ShadowHeap()
    heap.insert(0x20000, 16)
    addr = E.add(E.bv(0x20000, 64), E.zext(E.var("b0", 8), 56))
    assert bounds_for(0x20004, addr, heap, ShadowStack()) == Bounds(0x20000, 0x20010, "heap")
    with pytest.raises(ValueError):
        Bounds(8, 4, "stack")


# dedup and reports ------------------------------------------------------------

def test_dedup_bitmap_and_unsat_memo():
    d = DedupState()
    assert dedup_and_memo(d, "oob", 1, 2) == "Fresh"
    assert dedup_and_memo(d, "oob", 1, 2) == "Duplicate"
    assert dedup_and_memo(d, "oob", 1, 3) == "Fresh"
    d.remember_unsat("site", 7)
    assert not d.memoized("site", 6) and d.memoized("site", 7) and d.memoized("site", 50)


def test_site_hash_is_stable():
    assert site_hash("oob", 1, 2) == site_hash("oob", 1, 2) != site_hash("oob", 2, 1)
    with pytest.raises(ValueError):
        ErrorReport("Bogus", 0, 0)


@needs_solver
def test_wrong_watchpoint_is_refuted(programs):
    p = assemble_file(programs / "alloc_overflow.s")
    _, _, reports = Session(p, b"+00000000002", Config()).run()
    r = reports[0]
    assert verify_report(p, r) == "verified"
    r.watch = [f"{r.source_addr + 4:#x}:OF"]  # the malloc call, which never overflows
    r.input = b"+00000000002"
    assert verify_report(p, r) == "refuted"
