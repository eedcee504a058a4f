"""Security predicates: null dereference, division by zero, bounds and integer overflow."""

from .bounds import Bounds, NoConcretePart, bounds_for, concrete_base_heuristic
from .checker import Checker, DedupState, OverflowSource, dedup_and_memo, mark_overflow_source
from .predicates import branch_condition, flag_exprs, overflow_predicates, result_expr
from .report import ErrorReport, site_hash, trap_matches, verify_report
from .shadow import DoubleFree, FreeUnknown, ShadowHeap, ShadowStack
from .signedness import Signedness, backward_slice_signedness, detect_signedness
