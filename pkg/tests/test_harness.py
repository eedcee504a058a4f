from fractions import Fraction
from pathlib import Path

import pytest

from predhunt.harness import (
    CRAFTED,
    Counts,
    ManifestError,
    SuiteMetrics,
    TestCase,
    Verdict,
    bundled_manifest,
    classify,
    craft_input,
    load_manifest,
    parse_manifest,
    run_case,
    run_cases,
    run_suite,
    write_results,
)
from predhunt.secpred import ErrorReport

import libc_oracle as C
from conftest import needs_solver

WIDTHS = {"i8": 8, "i16": 16, "i32": 32, "i64": 64}


def test_crafted_inputs():
    assert craft_input("i32") == b"+00000000002"
    assert craft_input("i64") == b"+0000000000000000001"
    assert craft_input("i8") == b"+0002"
    with pytest.raises(ValueError):
        craft_input("i128")


@pytest.mark.parametrize("kind", ["i8", "i16"])
def test_crafted_shape_expresses_the_whole_type(kind):
    """Every value of the type fits the crafted shape: sign, the concrete zero, free digits."""
    w, n = WIDTHS[kind], len(CRAFTED[kind])
    free = n - 2
    for v in range(-(2 ** (w - 1)), 2 ** (w - 1)):
        s = ("-" if v < 0 else "+") + "0" + str(abs(v)).zfill(free)
        assert len(s) == n and C.strtol(s.encode(), 10) == v % 2**64


def test_crafted_i32_reaches_both_extremes():
    n = len(CRAFTED["i32"]) - 2
    assert 10**n - 1 >= 2**31


def test_bundled_manifest_is_balanced():
    cases = load_manifest(bundled_manifest())
    assert len(cases) >= 44
    by_class = {}
    for c in cases:
        by_class.setdefault(c.cwe, []).append(c.polarity)
        assert c.program.exists() and c.input.exists()
    assert len(by_class) == 11
    for pols in by_class.values():
        assert pols.count("positive") == pols.count("negative") >= 2


def test_manifest_errors(tmp_path):
    with pytest.raises(ManifestError):
        parse_manifest("# only a comment\n", tmp_path)
    with pytest.raises(ManifestError):
        parse_manifest("a, CWE1, positive, a.s\n", tmp_path)
    with pytest.raises(ManifestError):
        parse_manifest("a, CWE1, sideways, a.s, i.txt, -\n", tmp_path)


def test_classification_rules():
    assert [classify(True, True), classify(True, False), classify(False, True), classify(False, False)] == [
        "TP", "FN", "FP", "TN"]
    good = ErrorReport("DivByZero", 1, 1, verification="verified")
    bad = ErrorReport("DivByZero", 1, 1, verification="refuted")
    assert Verdict.from_reports("x", "CWE369", True, [bad, good]).verified == "TP"
    v = Verdict.from_reports("x", "CWE369", True, [bad])
    assert (v.textual, v.verified) == ("TP", "FN")
    # false positives are not changed by verification
    v = Verdict.from_reports("y", "CWE369", False, [bad])
    assert (v.textual, v.verified) == ("FP", "FP")


def test_metric_identities():
    verdicts = [Verdict("a", "C1", True, "TP", "TP"), Verdict("b", "C1", True, "TP", "FN"),
                Verdict("c", "C1", False, "TN", "TN"), Verdict("d", "C1", False, "FP", "FP"),
                Verdict("e", "C2", True, error="boom")]
    m = SuiteMetrics.from_verdicts(verdicts)
    t, v = m.classes["C1"]["textual"], m.classes["C1"]["verified"]
    assert (t.P, t.N, t.TP, t.TN) == (2, 2, 2, 1)
    assert t.tpr == 1 and t.tnr == Fraction(1, 2) and t.acc == Fraction(3, 4)
    assert v.TP == 1 and v.acc == Fraction(1, 2)
    assert v.TP <= t.TP and v.TN == t.TN
    assert m.errored == ["e"] and "C2" not in m.classes
    assert m.to_dict()["total"]["verified"]["ACC"] == 50.0


def test_table_has_class_rows_and_total():
    m = SuiteMetrics.from_verdicts([Verdict("a", "C1", True, "TP", "TP"), Verdict("b", "C1", False, "TN", "TN")])
    table = m.table()
    assert "C1" in table and "TOTAL" in table and "100.00%" in table


def _pair():
    return [c for c in load_manifest(bundled_manifest()) if c.id.startswith("CWE369_divide_32")]


@needs_solver
def test_suite_of_one_pair_scores_full_marks(tmp_path):
    metrics, verdicts = run_suite(_pair())
    assert [(v.textual, v.verified) for v in verdicts] == [("TP", "TP"), ("TN", "TN")]
    total = metrics.total["verified"]
    assert total.tpr == total.tnr == total.acc == 1
    table, js = write_results(metrics, verdicts, tmp_path)
    assert table.exists() and js.exists()


@needs_solver
def test_sabotaged_verifier_downgrades_to_false_negative():
    def sabotage(program, report, budget=None, expected=None):
        report.watch = ["0x0:OF"]
        report.verification = "refuted"
        return report.verification

    v = run_case(_pair()[0], verifier=sabotage)
    assert (v.textual, v.verified) == ("TP", "FN")


def test_missing_program_is_errored(tmp_path):
    case = TestCase("x", "CWE1", "positive", tmp_path / "missing.s", tmp_path / "missing.txt")
    v = run_case(case)
    assert v.errored and "missing" in v.error


@needs_solver
def test_parallel_run_matches_serial():
    cases = _pair()
    assert [v.to_dict() for v in run_cases(cases, workers=2)] == [v.to_dict() for v in run_cases(cases)]
