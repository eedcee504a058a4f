"""Bitvector expressions, evaluation, SMT-LIB2 emission and solving."""

from .analysis import compile_exprs, contains_subtree, evaluate, find_extract_nodes, used_variables, variables
from .expr import (
    FALSE,
    TRUE,
    Expr,
    K,
    Kind,
    UnboundVariable,
    WidthMismatch,
    bv,
    mk,
    to_signed,
    var,
)
from .smtlib import emit_smtlib, parse_model, parse_response
from .solver import (
    DEFAULT_TIMEOUT_MS,
    BackendFailure,
    BuiltinBackend,
    ExternalBackend,
    Solver,
    Verdict,
    make_backend,
    solve,
)
