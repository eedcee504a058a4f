"""Test-case manifest and crafted numeric inputs."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

POLARITIES = ("positive", "negative")

# sign, one concrete zero, then enough free digits for the type's magnitude
CRAFTED = {
    "i8": b"+0002",
    "i16": b"+000002",
    "i32": b"+00000000002",
    "i64": b"+0000000000000000001",
}


def craft_input(input_type: str) -> bytes:
    try:
        return CRAFTED[input_type]
    except KeyError:
        raise ValueError(f"unknown input type {input_type!r}") from None


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    id: str
    cwe: str
    polarity: str
    program: Path
    input: Path
    expected_traps: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.polarity not in POLARITIES:
            raise ManifestError(f"{self.id}: bad polarity {self.polarity!r}")

    @property
    def positive(self) -> bool:
        return self.polarity == "positive"

    def input_bytes(self) -> bytes:
        return self.input.read_bytes()


def parse_manifest(text: str, root: Path) -> list[TestCase]:
    cases = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 6:
            raise ManifestError(f"line {n}: expected 6 fields, got {len(parts)}")
        cid, cwe, polarity, program, inp, traps = parts
        expected = frozenset() if traps in ("", "-") else frozenset(traps.split("|"))
        cases.append(TestCase(cid, cwe, polarity, root / program, root / inp, expected))
    if not cases:
        raise ManifestError("manifest lists no cases")
    ids = [c.id for c in cases]
    if len(set(ids)) != len(ids):
        raise ManifestError("duplicate case ids")
    return cases


def load_manifest(path: str | Path) -> list[TestCase]:
    path = Path(path)
    return parse_manifest(path.read_text(), path.parent)


def bundled_manifest() -> Path:
    return Path(__file__).resolve().parent.parent / "programs" / "juliet" / "manifest.txt"
