"""Per-case classification and TPR/TNR/ACC aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

OUTCOMES = ("TP", "FP", "TN", "FN")
CATEGORIES = ("textual", "verified")


def classify(positive: bool, reported: bool) -> str:
    if positive:
        return "TP" if reported else "FN"
    return "FP" if reported else "TN"


@dataclass
class Verdict:
    case_id: str
    cwe: str
    positive: bool
    textual: str = "TN"
    verified: str = "TN"
    reports: list = field(default_factory=list)
    error: str | None = None

    @property
    def errored(self) -> bool:
        return self.error is not None

    @classmethod
    def from_reports(cls, case_id, cwe, positive, reports):
        textual = classify(positive, bool(reports))
        verified = textual
        if textual == "TP" and not any(r.verification == "verified" for r in reports):
            verified = "FN"
        return cls(case_id, cwe, positive, textual, verified, list(reports))

    def to_dict(self) -> dict:
        d = {"id": self.case_id, "cwe": self.cwe, "polarity": "positive" if self.positive else "negative"}
        if self.errored:
            d["error"] = self.error
        else:
            d.update(textual=self.textual, verified=self.verified,
                     reports=[r.to_dict() for r in self.reports])
        return d


def _ratio(num: int, den: int) -> Fraction | None:
    return Fraction(num, den) if den else None


def pct(x: Fraction | None) -> str:
    return "-" if x is None else f"{float(x * 100):.2f}%"


@dataclass
class Counts:
    P: int = 0
    N: int = 0
    TP: int = 0
    TN: int = 0

    def add(self, positive: bool, outcome: str):
        if positive:
            self.P += 1
        else:
            self.N += 1
        if outcome == "TP":
            self.TP += 1
        elif outcome == "TN":
            self.TN += 1

    @property
    def tpr(self):
        return _ratio(self.TP, self.P)

    @property
    def tnr(self):
        return _ratio(self.TN, self.N)

    @property
    def acc(self):
        return _ratio(self.TP + self.TN, self.P + self.N)

    def to_dict(self) -> dict:
        r = lambda x: None if x is None else round(float(x * 100), 2)
        return {"P": self.P, "N": self.N, "TP": self.TP, "TN": self.TN,
                "TPR": r(self.tpr), "TNR": r(self.tnr), "ACC": r(self.acc)}


@dataclass
class SuiteMetrics:
    classes: dict = field(default_factory=dict)  # cwe -> {category: Counts}
    total: dict = field(default_factory=lambda: {c: Counts() for c in CATEGORIES})
    errored: list = field(default_factory=list)

    @classmethod
    def from_verdicts(cls, verdicts) -> "SuiteMetrics":
        m = cls()
        for v in verdicts:
            if v.errored:
                m.errored.append(v.case_id)
                continue
            per = m.classes.setdefault(v.cwe, {c: Counts() for c in CATEGORIES})
            for cat in CATEGORIES:
                outcome = getattr(v, cat)
                per[cat].add(v.positive, outcome)
                m.total[cat].add(v.positive, outcome)
        m.classes = dict(sorted(m.classes.items()))
        return m

    def to_dict(self) -> dict:
        return {
            "classes": {k: {c: v[c].to_dict() for c in CATEGORIES} for k, v in self.classes.items()},
            "total": {c: self.total[c].to_dict() for c in CATEGORIES},
            "errored": list(self.errored),
        }

    def table(self) -> str:
        head = f"{'CWE':<8}{'P=N':>5} | {'TP':>4}{'TN':>4}{'TPR':>9}{'TNR':>9}{'ACC':>9} | " \
               f"{'TP':>4}{'TN':>4}{'TPR':>9}{'TNR':>9}{'ACC':>9}"
        title = f"{'':<13} | {'Textual errors':^43} | {'Checked-mode verification':^43}"
        lines = [title, head, "-" * len(head)]
        rows = list(self.classes.items()) + [("TOTAL", self.total)]
        for name, per in rows:
            t, v = per["textual"], per["verified"]
            size = str(t.P) if t.P == t.N else f"{t.P}/{t.N}"
            cells = [f"{name:<8}{size:>5}"]
            for c in (t, v):
                cells.append(f"{c.TP:>4}{c.TN:>4}{pct(c.tpr):>9}{pct(c.tnr):>9}{pct(c.acc):>9}")
            if name == "TOTAL":
                lines.append("-" * len(head))
            lines.append(" | ".join(cells))
        if self.errored:
            lines.append(f"errored: {', '.join(self.errored)}")
        return "\n".join(lines)
