"""Overflow predicates and symbolic flag expressions for arithmetic instructions.

Every predicate is built in double width: an operation overflows when the
exact result, computed wide enough to never wrap, differs from the wrapped
result extended back.
"""

from __future__ import annotations

from ..smt import expr as E
from ..smt.expr import FALSE, Expr

FLAG_OPS = {"add", "adc", "sub", "sbb", "cmp", "neg", "mul", "imul", "shl", "sal"}


def _w(x: Expr, n: int, signed: bool) -> Expr:
    return E.sext(x, n) if signed else E.zext(x, n)


def _cin(cin: Expr | None, width: int, extra: int) -> Expr:
    c = cin if cin is not None else E.bv(0, 1)
    if c.is_bool:
        c = E.ite(c, E.bv(1, 1), E.bv(0, 1))
    return E.zext(c, width + extra - 1)


def result_expr(mn: str, a: Expr, b: Expr | None = None, cin: Expr | None = None) -> Expr:
    """The wrapped result of ``mn`` at the operands' width."""
    w = a.width
    if mn in ("add", "adc"):
        r = E.add(a, b)
        return E.add(r, _cin(cin, w, 0)) if mn == "adc" else r
    if mn in ("sub", "sbb", "cmp"):
        r = E.sub(a, b)
        return E.sub(r, _cin(cin, w, 0)) if mn == "sbb" else r
    if mn in ("mul", "imul"):
        return E.mul(a, b)
    if mn == "neg":
        return E.neg(a)
    if mn in ("shl", "sal"):
        return E.shl(a, b)
    if mn == "shr":
        return E.lshr(a, b)
    if mn == "sar":
        return E.ashr(a, b)
    if mn in ("and", "test"):
        return E.band(a, b)
    if mn == "or":
        return E.bor(a, b)
    if mn == "xor":
        return E.bxor(a, b)
    if mn == "not":
        return E.bnot(a)
    if mn == "div":
        return E.udiv(a, b)
    raise ValueError(f"no result expression for {mn}")


def overflow_predicates(mn: str, a: Expr, b: Expr | None = None, cin: Expr | None = None):
    """(unsigned, signed) overflow predicates of one operation.

    Shift amounts must be constants (the engine pins symbolic counts).
    """
    w = a.width
    if mn in ("add", "adc"):
        wide_u = E.add(E.zext(a, 1), E.zext(b, 1))
        wide_s = E.add(E.sext(a, 1), E.sext(b, 1))
        if mn == "adc":
            wide_u = E.add(wide_u, _cin(cin, w, 1))
            wide_s = E.add(wide_s, _cin(cin, w, 1))
        r = result_expr(mn, a, b, cin)
        return E.eq(E.extract(wide_u, w, w), E.bv(1, 1)), E.ne(wide_s, E.sext(r, 1))
    if mn in ("sub", "sbb", "cmp"):
        if mn == "sbb":
            unsigned = E.ult(E.zext(a, 1), E.add(E.zext(b, 1), _cin(cin, w, 1)))
            wide_s = E.sub(E.sub(E.sext(a, 1), E.sext(b, 1)), _cin(cin, w, 1))
        else:
            unsigned = E.ult(a, b)
            wide_s = E.sub(E.sext(a, 1), E.sext(b, 1))
        r = result_expr(mn, a, b, cin)
        return unsigned, E.ne(wide_s, E.sext(r, 1))
    if mn in ("mul", "imul"):
        r = E.mul(a, b)
        unsigned = E.ne(E.mul(E.zext(a, w), E.zext(b, w)), E.zext(r, w))
        signed = E.ne(E.mul(E.sext(a, w), E.sext(b, w)), E.sext(r, w))
        return unsigned, signed
    if mn == "neg":
        return E.ne(a, E.bv(0, w)), E.eq(a, E.bv(1 << (w - 1), w))
    if mn in ("shl", "sal"):
        if not b.is_const:
            raise ValueError("shift predicates need a concrete count")
        n = b.value & (63 if w == 64 else 31)
        if n == 0:
            return FALSE, FALSE
        if n >= w:
            nz = E.ne(a, E.bv(0, w))
            return nz, nz
        c = E.bv(n, w)
        r = E.shl(a, c)
        return E.ne(E.lshr(r, c), a), E.ne(E.ashr(r, c), a)
    return FALSE, FALSE


def _bit(x: Expr, i: int) -> Expr:
    return E.eq(E.extract(x, i, i), E.bv(1, 1))


def flag_exprs(mn: str, a: Expr, b: Expr | None, cin: Expr | None, r: Expr):
    """Symbolic (CF, OF, ZF, SF) after ``mn``; mirrors the concrete flag rules."""
    w = a.width
    zf = E.eq(r, E.bv(0, w))
    sf = _bit(r, w - 1)
    cf = of = FALSE
    if mn in ("add", "adc", "sub", "sbb", "cmp", "neg", "mul", "imul"):
        unsigned, signed = overflow_predicates(mn, a, b, cin)
        if mn == "mul":
            cf = of = unsigned
        elif mn == "imul":
            cf = of = signed
        else:
            cf, of = unsigned, signed
    elif mn in ("shl", "sal", "shr", "sar"):
        n = b.value & (63 if w == 64 else 31)
        if mn in ("shl", "sal"):
            cf = _bit(a, w - n) if 1 <= n <= w else FALSE
            if n == 1:
                of = E.ne(sf, cf)
        elif mn == "shr":
            cf = _bit(a, n - 1) if 1 <= n <= w else FALSE
            if n == 1:
                of = _bit(a, w - 1)
        else:
            cf = _bit(a, min(n, w) - 1) if n else FALSE
    return cf, of, zf, sf


_SIGNED_CMP = {"jl": E.slt, "jge": E.sge, "jg": E.sgt, "jle": E.sle}
_UNSIGNED_CMP = {"jb": E.ult, "jae": E.uge, "ja": E.ugt, "jbe": E.ule}


def branch_condition(jump: str, mn: str, a: Expr, b: Expr | None, cin: Expr | None, r: Expr) -> Expr:
    """Boolean condition under which ``jump`` is taken after flag source ``mn``."""
    if mn in ("cmp", "sub"):
        if jump in _SIGNED_CMP:
            return _SIGNED_CMP[jump](a, b)
        if jump in _UNSIGNED_CMP:
            return _UNSIGNED_CMP[jump](a, b)
        if jump == "jz":
            return E.eq(a, b)
        if jump == "jnz":
            return E.ne(a, b)
    if mn in ("test", "and", "or", "xor"):
        zero = E.bv(0, r.width)
        simple = {"jz": E.eq(r, zero), "jnz": E.ne(r, zero), "js": E.slt(r, zero),
                  "jns": E.sge(r, zero), "jl": E.slt(r, zero), "jge": E.sge(r, zero),
                  "jg": E.sgt(r, zero), "jle": E.sle(r, zero), "jb": FALSE,
                  "jae": E.lnot(FALSE), "ja": E.ne(r, zero), "jbe": E.eq(r, zero)}
        return simple[jump]
    cf, of, zf, sf = flag_exprs(mn, a, b, cin, r)
    if jump == "jz":
        return zf
    if jump == "jnz":
        return E.lnot(zf)
    if jump == "js":
        return sf
    if jump == "jns":
        return E.lnot(sf)
    if jump == "jl":
        return E.ne(sf, of)
    if jump == "jge":
        return E.eq(sf, of)
    if jump == "jg":
        return E.land(E.lnot(zf), E.eq(sf, of))
    if jump == "jle":
        return E.lor(zf, E.ne(sf, of))
    if jump == "jb":
        return cf
    if jump == "jae":
        return E.lnot(cf)
    if jump == "ja":
        return E.land(E.lnot(cf), E.lnot(zf))
    if jump == "jbe":
        return E.lor(cf, zf)
    raise ValueError(f"not a conditional jump: {jump}")
