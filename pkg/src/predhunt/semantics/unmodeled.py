"""Branch conditions a byte-at-a-time library implementation would record.

Used when function models are disabled: the call is traced as if its loop ran
instruction by instruction, so every scanned symbolic byte adds branches and
the return value stays concrete.
"""

from __future__ import annotations

from ..smt import expr as E
from ..smt.expr import Expr
from ..vm import libc
from .models import STRTO, BufferView, string_bytes, valid_digit

_ZERO = E.bv(0, 8)


def _oriented(cond: Expr, value) -> Expr:
    return cond if value(cond) else E.lnot(cond)


def _search(name, args, view):
    if name == "memchr":
        data = [view.sym(args[0] + k) for k in range(args[2])]
        ch = E.bv(args[1] & 0xFF, 8)
        return [E.eq(b, ch) for b in data]
    data = string_bytes(view, args[0])
    if name == "strlen":
        return [E.eq(b, _ZERO) for b in data]
    if name == "strchr":
        ch = E.bv(args[1] & 0xFF, 8)
        return [c for b in data for c in (E.eq(b, ch), E.eq(b, _ZERO))]
    needle = string_bytes(view, args[1])[:-1]
    return [E.eq(data[k + j], n) for k in range(len(data) - len(needle)) for j, n in enumerate(needle)]


def _compare(name, args, view):
    if name == "memcmp":
        lhs = [view.sym(args[0] + k) for k in range(args[2])]
        rhs = [view.sym(args[1] + k) for k in range(args[2])]
        return [E.eq(x, y) for x, y in zip(lhs, rhs)]
    limit = args[2] if name == "strncmp" else None
    lhs, rhs = string_bytes(view, args[0], limit), string_bytes(view, args[1], limit)
    n = min(len(lhs), len(rhs))
    return [c for x, y in zip(lhs[:n], rhs[:n]) for c in (E.eq(x, y), E.eq(x, _ZERO))]


def _convert(name, args, view):
    base = 10 if name == "atoi" else args[2]
    data = string_bytes(view, args[0])
    conc = bytes(view.conc(args[0] + k) for k in range(len(data)))
    if base != 0 and not 2 <= base <= 36:
        return []
    _, _, _, b, _, end = libc.scan_number(conc[:libc.strlen(conc)], base)
    out = []
    for c in data[:end + 1]:
        out.append(E.eq(c, E.bv(32, 8)))
        out.append(E.eq(c, E.bv(45, 8)))
        out.append(valid_digit(c, b))
    return out


def trace_conditions(name: str, args: tuple, view: BufferView, value) -> list[Expr]:
    """Oriented, non-constant conditions for one unmodeled call."""
    if name in ("memchr", "strlen", "strchr", "strstr"):
        conds = _search(name, args, view)
    elif name in ("memcmp", "strcmp", "strncmp"):
        conds = _compare(name, args, view)
    elif name in STRTO or name == "atoi":
        conds = _convert(name, args, view)
    else:
        return []
    return [_oriented(c, value) for c in conds if not c.is_const]
