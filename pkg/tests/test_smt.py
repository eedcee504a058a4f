import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predhunt.smt import expr as E
from predhunt.smt import (
    BuiltinBackend,
    Solver,
    WidthMismatch,
    compile_exprs,
    contains_subtree,
    emit_smtlib,
    evaluate,
    find_extract_nodes,
    parse_model,
    parse_response,
    used_variables,
)
from predhunt.smt.solver import ExternalBackend, find_external, make_backend

from conftest import needs_solver

x8, y8 = E.var("x", 8), E.var("y", 8)

BINOPS = {
    "add": (E.add, lambda a, b, w: (a + b) % 2**w),
    "sub": (E.sub, lambda a, b, w: (a - b) % 2**w),
    "mul": (E.mul, lambda a, b, w: (a * b) % 2**w),
    "udiv": (E.udiv, lambda a, b, w: a // b if b else 2**w - 1),
    "and": (E.band, lambda a, b, w: a & b),
    "or": (E.bor, lambda a, b, w: a | b),
    "xor": (E.bxor, lambda a, b, w: a ^ b),
    "shl": (E.shl, lambda a, b, w: (a << b) % 2**w if b < w else 0),
    "lshr": (E.lshr, lambda a, b, w: a >> b if b < w else 0),
}


def signed(v, w):
    return v - 2**w if v >> (w - 1) else v


def test_hash_consing_shares_nodes():
    assert E.add(x8, y8) is E.add(x8, y8)
    assert E.bv(3, 8) is E.bv(3 + 256, 8)


def test_constant_folding():
    assert E.add(E.bv(200, 8), E.bv(100, 8)).value == 44
    assert not E.add(x8, E.bv(0, 8)).is_const


def test_width_mismatch_rejected():
    with pytest.raises(WidthMismatch):
        E.add(x8, E.var("z", 16))


def test_used_variables():
    e = E.ult(E.add(x8, E.bv(1, 8)), E.zext(E.var("b3", 4), 4))
    assert used_variables(e) == {"x", "b3"}


@settings(max_examples=300)
@given(st.sampled_from(sorted(BINOPS)), st.integers(0, 255), st.integers(0, 255))
def test_binop_semantics_match_integer_oracle(op, a, b):
    build, ref = BINOPS[op]
    e = build(x8, y8)
    assert evaluate(e, {"x": a, "y": b}) == ref(a, b, 8)
    # folding the same operation on constants agrees with evaluation
    assert build(E.bv(a, 8), E.bv(b, 8)).value == ref(a, b, 8)


@settings(max_examples=300)
@given(st.integers(0, 255), st.integers(0, 255))
def test_comparisons_match_integer_oracle(a, b):
    m = {"x": a, "y": b}
    assert evaluate(E.ult(x8, y8), m) == (a < b)
    assert evaluate(E.slt(x8, y8), m) == (signed(a, 8) < signed(b, 8))
    assert evaluate(E.sge(x8, y8), m) == (signed(a, 8) >= signed(b, 8))
    assert evaluate(E.ashr(x8, E.bv(b % 9, 8)), m) == (signed(a, 8) >> (b % 9)) % 256


@given(st.integers(0, 255), st.integers(0, 7), st.integers(0, 7))
def test_extract_extend_concat(a, i, j):
    lo, hi = min(i, j), max(i, j)
    m = {"x": a}
    assert evaluate(E.extract(x8, hi, lo), m) == (a >> lo) & (2 ** (hi - lo + 1) - 1)
    assert evaluate(E.sext(x8, 8), m) == signed(a, 8) % 2**16
    assert evaluate(E.zext(x8, 8), m) == a
    assert evaluate(E.concat(x8, E.bv(1, 8)), m) == a * 256 + 1


@st.composite
def exprs(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from([x8, y8, E.bv(draw(st.integers(0, 255)), 8)]))
    op = draw(st.sampled_from(sorted(BINOPS)))
    return BINOPS[op][0](draw(exprs(depth=depth - 1)), draw(exprs(depth=depth - 1)))


@settings(max_examples=200)
@given(exprs(), st.integers(0, 255), st.integers(0, 255))
def test_compiled_evaluation_agrees(e, a, b):
    fn = compile_exprs([e], ["x", "y"])
    assert fn(a, b)[0] == evaluate(e, {"x": a, "y": b})


def test_contains_subtree_and_extract_search():
    src = E.mul(x8, E.bv(4, 8))
    sink = E.zext(E.extract(E.add(E.sext(src, 8), E.var("k", 16)), 7, 0), 56)
    assert contains_subtree(sink, src)
    assert not contains_subtree(sink, E.add(x8, y8))
    hits = find_extract_nodes(sink, src)
    assert [(lo, hi) for _, lo, hi in hits] == [(0, 7)]


def test_smtlib_emission_declares_variables():
    text = emit_smtlib([E.eq(E.add(x8, y8), E.bv(5, 8))])
    assert "(declare-fun x () (_ BitVec 8))" in text
    assert "(check-sat)" in text


def test_parse_model():
    text = "((define-fun x () (_ BitVec 8) #x2a) (define-fun b0 () (_ BitVec 8) #b00000001))"
    assert parse_model(text) == {"x": 42, "b0": 1}
    assert parse_response("unsat\n")[0] == "unsat"


def test_builtin_backend_solves_small_formulas():
    s = Solver(BuiltinBackend())
    v = s.solve([E.eq(E.mul(x8, E.bv(3, 8)), E.bv(7, 8))])
    assert v.sat and v.model["x"] * 3 % 256 == 7
    assert s.solve([E.ult(x8, E.bv(0, 8))]).unsat


def test_solver_cache_answers_repeated_queries():
    s = Solver(BuiltinBackend())
    a = [E.eq(x8, E.bv(9, 8))]
    s.solve(a)
    s.solve(list(a))
    assert s.stats.queries == 1 and s.stats.cache_hits == 1


def test_builtin_backend_gives_up_on_wide_formulas():
    wide = E.var("w", 64)
    assert Solver(BuiltinBackend()).solve([E.eq(wide, E.bv(3, 64))]).unknown


def test_make_backend_env_override(monkeypatch):
    monkeypatch.setenv("PREDHUNT_SOLVER", "builtin")
    assert make_backend("external:/nonexistent").name == "builtin"
    monkeypatch.delenv("PREDHUNT_SOLVER")
    with pytest.raises(ValueError):
        make_backend("bogus")


@needs_solver
@settings(max_examples=25, deadline=None)
@given(exprs(), st.integers(0, 255))
def test_external_model_satisfies_formula(e, target):
    s = Solver(ExternalBackend(find_external()))
    goal = [E.eq(e, E.bv(target, 8))]
    v = s.solve(goal)
    if v.sat:
        m = {"x": 0, "y": 0, **v.model}
        assert evaluate(goal[0], m) == 1
    else:
        brute = Solver(BuiltinBackend()).solve(goal)
        assert brute.sat == v.sat


@needs_solver
def test_external_wide_query():
    w = E.var("w", 64)
    v = Solver(make_backend("external")).solve([E.eq(E.mul(w, E.bv(3, 64)), E.bv(2**63 + 1, 64))])
    assert v.sat and v.model["w"] * 3 % 2**64 == 2**63 + 1
