import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from predhunt.smt.solver import find_external  # noqa: E402

PROGRAMS = Path(__file__).resolve().parent.parent / "src" / "predhunt" / "programs"

needs_solver = pytest.mark.skipif(find_external() is None, reason="no external SMT solver on PATH")


@pytest.fixture
def programs() -> Path:
    return PROGRAMS
