"""Positive/negative test-suite scoring with checked-mode verification."""

from .cases import CRAFTED, ManifestError, TestCase, bundled_manifest, craft_input, load_manifest, parse_manifest
from .metrics import CATEGORIES, Counts, SuiteMetrics, Verdict, classify, pct
from .runner import run_case, run_cases, run_suite, write_results

__all__ = [
    "CRAFTED", "ManifestError", "TestCase", "bundled_manifest", "craft_input", "load_manifest", "parse_manifest",
    "CATEGORIES", "Counts", "SuiteMetrics", "Verdict", "classify", "pct",
    "run_case", "run_cases", "run_suite", "write_results",
]
