import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predhunt.concolic import (
    Config,
    PathPredicate,
    Session,
    compute_accuracy,
    execute_concolic,
    flips_at,
    generate_input,
    input_var,
    invert_all,
    slice_path,
)
from predhunt.smt import evaluate
from predhunt.smt import expr as E
from predhunt.smt.solver import BuiltinBackend, Solver
from predhunt.vm import assemble, assemble_file, run

from conftest import PROGRAMS, needs_solver


@st.composite
def paths(draw):
    p = PathPredicate()
    for i in range(draw(st.integers(0, 12))):
        vs = draw(st.sets(st.integers(0, 7), min_size=1, max_size=3))
        e = E.add(*[E.zext(input_var(v), 8) for v in vs]) if len(vs) > 1 else E.zext(input_var(min(vs)), 8)
        p.add(E.ne(e, E.bv(1000 + i, 16)), 0x400000 + i, None, "jnz",
              draw(st.sampled_from(["branch", "model", "pin", "tie"])))
    return p


@settings(max_examples=200)
@given(paths(), st.sets(st.integers(0, 7), max_size=3))
def test_slice_is_an_ordered_variable_closed_subset(p, seeds):
    seed_vars = {f"b{v}" for v in seeds}
    s = slice_path(p, seed_vars)
    assert [c.index for c in s] == sorted(c.index for c in s)
    assert all(c.kind != "tie" for c in s)
    reached = set(seed_vars).union(*(c.vars for c in s))
    for c in p:
        if c not in s and c.kind != "tie":
            assert not (c.vars & reached)


@given(st.binary(min_size=1, max_size=8), st.dictionaries(st.integers(0, 15), st.integers(0, 255)))
def test_generate_input_replaces_only_modeled_bytes(original, values):
    model = {f"b{k}": v for k, v in values.items()}
    out = generate_input(model, original)
    for k in range(len(out)):
        if k in values:
            assert out[k] == values[k]
        elif k < len(original):
            assert out[k] == original[k]
        else:
            assert out[k] == 0


def test_config_validation():
    with pytest.raises(ValueError):
        Config(predicates={"bogus"})
    with pytest.raises(ValueError):
        Config(timeout_ms=0)


def test_path_constraints_hold_on_the_original_input():
    data = b"Bcdefghijk"
    path, trace, _ = execute_concolic(assemble_file(PROGRAMS / "branches10.s"), data,
                                      Config(predicates=(), solver="builtin"))
    identity = {f"b{k}": c for k, c in enumerate(data)}
    assert len(path.branches()) == 10
    assert all(evaluate(c.constraint, identity) == 1 for c in path)
    assert [c.trace_index for c in path.branches()] == list(range(10))


def test_concrete_program_has_empty_path():
    src = ".data\nbuf: .zero 4\n.text\nmain:\n    mov.64 r0, 3\n    cmp.64 r0, 2\n    ja x\nx:\n    ret\n"
    path, _, reports = execute_concolic(assemble(src), b"", Config(solver="builtin"))
    assert len(path) == 0 and reports == []


def test_flips_at_and_accuracy():
    orig = [(1, True), (2, False), (3, True)]
    assert flips_at(orig, [(1, True), (2, True)], 1)
    assert not flips_at(orig, [(1, False), (2, True)], 1)
    assert not flips_at(orig, [(1, True)], 1)
    assert compute_accuracy([], orig) is None
    assert compute_accuracy([(1, [(1, True), (2, True)]), (0, [(1, True)])], orig) == 50.0


def test_inversion_with_builtin_backend():
    p = assemble_file(PROGRAMS / "branches10.s")
    data = b"Bcdefghijk"
    s = Session(p, data, Config(predicates=(), solver="builtin"))
    path, trace, _ = s.run()
    verdicts, acc = invert_all(p, data, path, trace.outcome.branches, s.solver)
    assert len(verdicts) == 10 and acc == 100.0
    for v in verdicts:
        new = run(p, v.input).branches
        assert new[v.trace_index] == (v.address, not v.taken)


class _Unknown:
    name = "never"

    def check(self, assertions, timeout_ms):
        from predhunt.smt.solver import Verdict
        return Verdict.Unknown("timeout")


def test_unknown_queries_are_outside_the_accuracy_denominator():
    p = assemble_file(PROGRAMS / "branches10.s")
    data = b"Bcdefghijk"
    s = Session(p, data, Config(predicates=()), Solver(_Unknown()))
    path, trace, _ = s.run()
    verdicts, acc = invert_all(p, data, path, trace.outcome.branches, s.solver)
    assert {v.status for v in verdicts} == {"unknown"} and acc is None


@needs_solver
def test_models_shrink_the_path_of_string_code():
    p = assemble_file(PROGRAMS / "strings.s")
    data = b"key=42;end"
    on, _, _ = execute_concolic(p, data, Config(predicates=()))
    off, _, _ = execute_concolic(p, data, Config(predicates=(), models=False))
    assert 0 < len(on.branches()) < len(off.branches())


@needs_solver
def test_index_load_reports_at_the_load():
    p = assemble_file(PROGRAMS / "index_load.s")
    _, trace, reports = execute_concolic(p, b"+0000000000000000001")
    load = next(i.address for i in p.instructions if i.mnemonic == "load")
    assert {r.kind for r in reports} >= {"NullDeref"}
    assert all(r.sink_addr == load for r in reports)
    assert trace.count("model") == 1


@needs_solver
def test_symbolic_address_goes_to_the_predicates_and_loads_concretely():
    src = """
.data
buf: .zero 8
tab: .zero 256
.text
main:
    mov.64 r0, buf
    mov.64 r1, 1
    icall read
    mov.64 r9, buf
    load.8 r1, [r9 + 0]
    mov.64 r2, tab
    load.8 r0, [r2 + r1]
    cmp.8 r0, 0
    jnz x
x:
    ret
"""
    s = Session(assemble(src), b"\x07")
    path, _, reports = s.run()
    assert len(path) == 0  # the loaded table byte is concrete
    assert s.solver.stats.queries > 0 and reports == []


@needs_solver
def test_short_square_investigation_runs_to_completion(capsys):
    # narrowing a promoted product is an open case; record the outcome, assert nothing about it
    p = assemble_file(PROGRAMS / "investigation" / "short_square.s")
    _, trace, reports = execute_concolic(p, b"+000002")
    assert trace.outcome is not None
    with capsys.disabled():
        print("\nshort_square:", [(r.kind, r.input, r.signedness_evidence) for r in reports])
