"""End-to-end acceptance checks; each prints one PASS/FAIL line."""

import itertools
import time
from contextlib import contextmanager

from predhunt.concolic import Config, Session, execute_concolic, invert_all
from predhunt.harness import bundled_manifest, run_suite
from predhunt.secpred import overflow_predicates, verify_report
from predhunt.smt import compile_exprs, evaluate
from predhunt.smt import expr as E
from predhunt.vm import Machine, assemble, assemble_file, run
from predhunt.vm.events import IntrinsicCall

import semantics_oracle
import test_secpred
from conftest import PROGRAMS, needs_solver


@contextmanager
def criterion(capsys, n: int, title: str):
    detail = {}
    start = time.perf_counter()
    ok = False
    try:
        yield detail
        ok = True
    finally:
        took = time.perf_counter() - start
        extra = ", ".join(f"{k}={v}" for k, v in detail.items())
        with capsys.disabled():
            print(f"\nCRITERION {n} {'PASS' if ok else 'FAIL'}: {title} ({took:.1f}s{', ' + extra if extra else ''})")


def test_criterion_1_function_semantics_oracle(capsys):
    with criterion(capsys, 1, "library models equal the C library on every enumerated input") as d:
        start = time.perf_counter()
        total, mismatches, covered = 0, [], set()
        for label, checked, bad in semantics_oracle.run_all():
            assert checked > 0, label
            total += checked
            mismatches += [(label, b) for b in bad]
            covered.add(label.split()[0])
            if label.startswith("strto"):
                covered.add(label.split()[0] + "/" + label.split()[2])
        elapsed = time.perf_counter() - start
        d.update(cases=total, mismatches=len(mismatches))
        assert not mismatches, mismatches[:5]
        assert {"memchr", "strchr", "strlen", "strcmp", "strncmp", "memcmp", "strstr"} <= covered
        assert {f"{f}/{b}" for f in ("strtol", "strtoul") for b in (0, 8, 10, 16)} <= covered
        assert elapsed < 60


@needs_solver
def test_criterion_2_indexed_load(capsys):
    with criterion(capsys, 2, "indexed load: report and checked-mode trap at the load") as d:
        start = time.perf_counter()
        p = assemble_file(PROGRAMS / "index_load.s")
        _, _, reports = execute_concolic(p, b"+0000000000000000001")
        load = next(i.address for i in p.instructions if i.mnemonic == "load")
        hits = [r for r in reports if r.kind in ("NullDeref", "OutOfBoundsRead") and r.sink_addr == load]
        assert hits
        for r in hits:
            trap = run(p, r.input, "checked").trap
            assert trap is not None and trap.address == load
        d.update(reports=",".join(f"{r.kind}:{r.input.decode()}" for r in hits))
        assert time.perf_counter() - start < 10


def _strtol32(data: bytes) -> int:
    return E.to_signed(int(data.decode()) & 0xFFFFFFFF, 32)


@needs_solver
def test_criterion_3_allocation_size_overflow(capsys):
    with criterion(capsys, 3, "signed overflow at the multiply, witness and 4-byte allocation") as d:
        start = time.perf_counter()
        p = assemble_file(PROGRAMS / "alloc_overflow.s")
        _, _, reports = execute_concolic(p, b"+00000000002")
        mul = next(i.address for i in p.instructions if i.mnemonic == "imul")
        r = next(r for r in reports if r.kind == "IntOverflowSigned")
        assert r.source_addr == mul and r.signedness_evidence == "strto-family"
        size = _strtol32(r.input)
        product = size * 4
        assert product != E.to_signed(product & 0xFFFFFFFF, 32)
        assert (product & 0xFFFFFFFF) < 8 and size > 0
        # checked re-execution allocates 4 bytes and writes past them
        vm = Machine(p, r.input, "checked")
        allocs = [ev.args[0] for ev in vm.events() if isinstance(ev, IntrinsicCall) and ev.name == "malloc"]
        result = vm.result()
        assert allocs == [4] and result.trap.kind == "OutOfBounds"
        assert verify_report(p, r) == "verified"
        # a known witness satisfies the solved predicate by direct substitution
        witness = b"+01073741825"
        model = {f"b{k}": c for k, c in enumerate(witness)}
        assert all(evaluate(a, model) == 1 for a in r.predicate)
        d.update(input=r.input.decode(), watch=",".join(r.watch))
        assert time.perf_counter() - start < 10


SCORED = ["CWE121", "CWE122", "CWE124", "CWE126", "CWE127", "CWE194", "CWE680"]


@needs_solver
def test_criterion_4_micro_juliet(capsys):
    with criterion(capsys, 4, "micro test suite, checked-mode verified") as d:
        start = time.perf_counter()
        metrics, verdicts = run_suite(bundled_manifest(), workers=1)
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print("\n" + metrics.table())
        assert len(verdicts) >= 44 and len(metrics.classes) == 11 and not metrics.errored
        for cwe in SCORED:
            v = metrics.classes[cwe]["verified"]
            assert v.tpr == 1 and v.tnr == 1, cwe
        v = metrics.classes["CWE195"]["verified"]
        assert v.tpr >= 0.99 and v.tnr >= 0.99
        total = metrics.total["verified"]
        d.update(ACC=f"{float(total.acc) * 100:.2f}%", TPR=f"{float(total.tpr) * 100:.2f}%",
                 TNR=f"{float(total.tnr) * 100:.2f}%")
        assert total.acc >= 0.95
        assert elapsed < 300


def _ref(mn, a, b, cin):
    s = lambda v: v - 256 if v >= 128 else v
    if mn in ("add", "adc"):
        c = cin if mn == "adc" else 0
        return int(a + b + c > 255), int(not -128 <= s(a) + s(b) + c <= 127)
    if mn in ("sub", "sbb"):
        c = cin if mn == "sbb" else 0
        return int(a - b - c < 0), int(not -128 <= s(a) - s(b) - c <= 127)
    if mn in ("mul", "imul"):
        return int(a * b > 255), int(not -128 <= s(a) * s(b) <= 127)
    if mn == "neg":
        return int(a != 0), int(-s(a) > 127)
    n = b  # shl
    return int(a << n > 255), int(not -128 <= s(a) * 2**n <= 127)


def test_criterion_5_flag_predicates(capsys):
    with criterion(capsys, 5, "width-8 overflow predicates equal exact-arithmetic CF/OF") as d:
        x, y, c = E.var("x", 8), E.var("y", 8), E.var("c", 1)
        mismatches = checked = 0
        for mn in ("add", "sub", "adc", "sbb", "mul", "imul", "neg"):
            u, s = overflow_predicates(mn, x, y, c if mn in ("adc", "sbb") else None)
            fn = compile_exprs([u, s], ["x", "y", "c"])
            cins = (0, 1) if mn in ("adc", "sbb") else (0,)
            ys = range(256) if mn != "neg" else (0,)
            for a, b, cin in itertools.product(range(256), ys, cins):
                checked += 1
                mismatches += fn(a, b, cin) != _ref(mn, a, b, cin)
        for n in range(9):
            u, s = overflow_predicates("shl", x, E.bv(n, 8))
            fn = compile_exprs([u, s], ["x"])
            for a in range(256):
                checked += 1
                mismatches += fn(a) != _ref("shl", a, n, 0)
        d.update(checked=checked, mismatches=mismatches)
        assert mismatches == 0


@needs_solver
def test_criterion_6_signedness(capsys):
    with criterion(capsys, 6, "signedness by backward slicing and unknown-signedness suppression") as d:
        checks = [
            test_secpred.test_signed_jump_gives_signed,
            test_secpred.test_unsigned_jump_gives_unsigned,
            test_secpred.test_jz_is_skipped_for_an_earlier_decisive_branch,
            test_secpred.test_exhausted_slice_is_unknown,
            test_secpred.test_branches_in_returned_frames_are_ignored,
            test_secpred.test_single_sided_overflow_of_unknown_signedness_is_not_reported,
            test_secpred.test_signed_evidence_enables_the_single_sided_report,
        ]
        for check in checks:
            check()
        d.update(behaviors=len(checks))


@needs_solver
def test_criterion_7_branch_inversion(capsys):
    with criterion(capsys, 7, "inversion accuracy and model-driven path reduction") as d:
        p = assemble_file(PROGRAMS / "branches10.s")
        data = b"Bcdefghijk"
        s = Session(p, data, Config(predicates=()))
        path, trace, _ = s.run()
        verdicts, acc = invert_all(p, data, path, trace.outcome.branches, s.solver)
        assert len(verdicts) == 10 and acc == 100.0
        strings = assemble_file(PROGRAMS / "strings.s")
        text = b"key=42;end"
        on, _, _ = execute_concolic(strings, text, Config(predicates=()))
        off, _, _ = execute_concolic(strings, text, Config(predicates=(), models=False))
        d.update(accuracy=f"{acc:.2f}%", branches_models_on=len(on.branches()),
                 branches_models_off=len(off.branches()))
        assert len(on.branches()) < len(off.branches())


LOOP = """
.data
buf: .zero 8
.text
main:
    mov.64 r0, buf
    mov.64 r1, 1
    icall read
    mov.64 r9, buf
    load.8 r1, [r9 + 0]
    mov.64 r2, r1
    or.64 r2, 1
    mov.64 r5, 100
loop:
    cmp.64 r1, r5
    jz next
next:
    mov.64 r0, 1000
    div.64 r0, r2
    mov.64 r0, 1000
    div.64 r0, r1
    add.64 r5, 1
    cmp.64 r5, {end}
    jb loop
    mov.64 r0, 0
    ret
"""


@needs_solver
def test_criterion_8_dedup_and_memo(capsys):
    with criterion(capsys, 8, "one report per looped site, unsat sites never re-solved") as d:
        once = Session(assemble(LOOP.format(end=101)), b"\x07")
        _, _, r1 = once.run()
        many = Session(assemble(LOOP.format(end=108)), b"\x07")
        path, _, r8 = many.run()
        assert [r.kind for r in r1] == [r.kind for r in r8] == ["DivByZero"]
        # the path grows every iteration, but the unsat site is skipped after its first query
        assert len(path.branches()) > 1
        assert many.checker.skipped == 7
        assert many.solver.stats.queries == once.solver.stats.queries
        d.update(reports=len(r8), queries=many.solver.stats.queries, skipped=many.checker.skipped)
