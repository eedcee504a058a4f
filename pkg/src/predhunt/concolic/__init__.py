"""Concolic execution over the MiniVM."""

from .engine import PREDICATES, Config, Session, SymbolicTrace, execute_concolic
from .inversion import BranchVerdict, InversionResult, compute_accuracy, flips_at, invert_all, invert_branch
from .slicing import generate_input, slice_path
from .state import CallStack, Frame, PathConstraint, PathPredicate, SymbolicState, input_var
