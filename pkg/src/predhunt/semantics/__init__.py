"""Symbolic models of library intrinsics."""

from .effects import apply as apply_side_effect
from .effects import copy_bytes, terminator_constraints
from .models import (
    COMPARE,
    CONVERT,
    MODELED,
    SEARCH,
    SIDE_EFFECT,
    BufferView,
    ConversionModel,
    ModelResult,
    ModelSkipped,
    NoDigits,
    model_call,
    model_memchr,
    model_memcmp,
    model_strchr,
    model_strcmp,
    model_strlen,
    model_strstr,
    model_strtol,
    sign_class,
    sign_normalize,
)
from .unmodeled import trace_conditions


def list_models() -> list[tuple[str, str]]:
    """(intrinsic, treatment) for every intrinsic with symbolic handling."""
    rows = [(n, "return-value formula") for n in SEARCH + COMPARE]
    rows += [(n, "conversion constraints") for n in CONVERT]
    rows += [(n, "side effects only") for n in SIDE_EFFECT]
    return rows
