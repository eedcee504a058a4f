"""Hash-consed bitvector/boolean expression DAG.

Every node is built through :func:`mk`, which checks widths, folds constants,
applies a handful of local rewrites and interns the result, so two
structurally identical expressions are always the same Python object.
"""

from __future__ import annotations

import enum
import threading
import weakref
from typing import Iterable, Iterator, Sequence


class WidthMismatch(ValueError):
    pass


class UnboundVariable(KeyError):
    pass


class Kind(enum.Enum):
    BvConst = "const"
    BoolConst = "boolconst"
    BvVar = "var"
    Add = "bvadd"
    Sub = "bvsub"
    Mul = "bvmul"
    UDiv = "bvudiv"
    And = "bvand"
    Or = "bvor"
    Xor = "bvxor"
    Not = "bvnot"
    Neg = "bvneg"
    Shl = "bvshl"
    LShr = "bvlshr"
    AShr = "bvashr"
    Concat = "concat"
    Extract = "extract"
    ZeroExtend = "zero_extend"
    SignExtend = "sign_extend"
    Ite = "ite"
    Eq = "="
    Ne = "distinct"
    Ult = "bvult"
    Ule = "bvule"
    Ugt = "bvugt"
    Uge = "bvuge"
    Slt = "bvslt"
    Sle = "bvsle"
    Sgt = "bvsgt"
    Sge = "bvsge"
    BoolAnd = "and"
    BoolOr = "or"
    BoolNot = "not"


K = Kind

ARITH = {K.Add, K.Sub, K.Mul, K.UDiv, K.And, K.Or, K.Xor, K.Shl, K.LShr, K.AShr}
UNARY = {K.Not, K.Neg}
COMPARE = {K.Eq, K.Ne, K.Ult, K.Ule, K.Ugt, K.Uge, K.Slt, K.Sle, K.Sgt, K.Sge}
BOOL_CONN = {K.BoolAnd, K.BoolOr, K.BoolNot}
NARY = {K.Add, K.Mul, K.And, K.Or, K.Xor, K.Concat, K.BoolAnd, K.BoolOr}


class Expr:
    """One interned node. Never construct directly; use :func:`mk` or helpers."""

    __slots__ = ("kind", "width", "args", "params", "is_bool", "_vars", "__weakref__")

    kind: Kind
    width: int
    args: tuple[Expr, ...]
    params: tuple
    is_bool: bool

    def __setattr__(self, name, value):
        raise AttributeError("Expr is immutable")

    @property
    def is_const(self) -> bool:
        return self.kind is K.BvConst or self.kind is K.BoolConst

    @property
    def value(self) -> int:
        if not self.is_const:
            raise TypeError(f"{self.kind.name} node has no constant value")
        return self.params[0]

    @property
    def name(self) -> str:
        if self.kind is not K.BvVar:
            raise TypeError(f"{self.kind.name} node has no name")
        return self.params[0]

    @property
    def symbolic(self) -> bool:
        return bool(self.vars)

    @property
    def vars(self) -> frozenset[str]:
        v = self._vars
        if v is None:
            v = _collect_vars(self)
        return v

    def __repr__(self) -> str:
        return to_str(self, depth=4)

    def __reduce__(self):
        return (_rebuild, (self.kind, tuple(self.args), self.params, self.width, self.is_bool))


def _rebuild(kind, args, params, width, is_bool):
    if kind is K.BvConst:
        return bv(params[0], width)
    if kind is K.BoolConst:
        return TRUE if params[0] else FALSE
    if kind is K.BvVar:
        return var(params[0], width)
    return mk(kind, args, *params)


_table: weakref.WeakValueDictionary = weakref.WeakValueDictionary()
_lock = threading.Lock()


def _intern(kind: Kind, args: tuple, params: tuple, width: int, is_bool: bool) -> Expr:
    key = (kind, args, params, width)
    with _lock:
        node = _table.get(key)
        if node is not None:
            return node
        node = object.__new__(Expr)
        osa = object.__setattr__
        osa(node, "kind", kind)
        osa(node, "width", width)
        osa(node, "args", args)
        osa(node, "params", params)
        osa(node, "is_bool", is_bool)
        osa(node, "_vars", frozenset((params[0],)) if kind is K.BvVar else (frozenset() if not args else None))
        _table[key] = node
        return node


def _collect_vars(root: Expr) -> frozenset[str]:
    for node in postorder(root):
        if node._vars is None:
            acc: set[str] = set()
            for a in node.args:
                acc |= a._vars
            object.__setattr__(node, "_vars", frozenset(acc))
    return root._vars


def postorder(root: Expr) -> Iterator[Expr]:
    """Yield each distinct node of the DAG once, children before parents."""
    seen: set[int] = set()
    stack: list[tuple[Expr, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            yield node
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for a in reversed(node.args):
            if id(a) not in seen:
                stack.append((a, False))


def mask(width: int) -> int:
    return (1 << width) - 1


def to_signed(value: int, width: int) -> int:
    value &= mask(width)
    return value - (1 << width) if value >> (width - 1) else value


# --- leaves -----------------------------------------------------------------

def bv(value: int, width: int) -> Expr:
    if width <= 0:
        raise WidthMismatch(f"bitvector width must be positive, got {width}")
    return _intern(K.BvConst, (), (value & mask(width),), width, False)


def var(name: str, width: int) -> Expr:
    if width <= 0:
        raise WidthMismatch(f"bitvector width must be positive, got {width}")
    return _intern(K.BvVar, (), (name,), width, False)


TRUE = _intern(K.BoolConst, (), (1,), 1, True)
FALSE = _intern(K.BoolConst, (), (0,), 1, True)


def boolean(flag: bool) -> Expr:
    return TRUE if flag else FALSE


# --- concrete semantics (shared by folding and evaluation) ----------------

def apply_op(kind: Kind, params: tuple, widths: Sequence[int], vals: Sequence[int], width: int) -> int:
    """Value of one node given its children's values (SMT-LIB semantics)."""
    m = mask(width)
    if kind is K.Add:
        return sum(vals) & m
    if kind is K.Sub:
        return (vals[0] - vals[1]) & m
    if kind is K.Mul:
        r = 1
        for v in vals:
            r = (r * v) & m
        return r
    if kind is K.UDiv:
        return m if vals[1] == 0 else vals[0] // vals[1]
    if kind is K.And:
        r = m
        for v in vals:
            r &= v
        return r
    if kind is K.Or:
        r = 0
        for v in vals:
            r |= v
        return r
    if kind is K.Xor:
        r = 0
        for v in vals:
            r ^= v
        return r
    if kind is K.Not:
        return ~vals[0] & m
    if kind is K.Neg:
        return -vals[0] & m
    if kind is K.Shl:
        return 0 if vals[1] >= width else (vals[0] << vals[1]) & m
    if kind is K.LShr:
        return 0 if vals[1] >= width else vals[0] >> vals[1]
    if kind is K.AShr:
        s = to_signed(vals[0], width)
        return (s >> min(vals[1], width)) & m
    if kind is K.Concat:
        r = 0
        for v, w in zip(vals, widths):
            r = (r << w) | v
        return r
    if kind is K.Extract:
        hi, lo = params
        return (vals[0] >> lo) & mask(hi - lo + 1)
    if kind is K.ZeroExtend:
        return vals[0]
    if kind is K.SignExtend:
        return to_signed(vals[0], widths[0]) & m
    if kind is K.Ite:
        return vals[1] if vals[0] else vals[2]
    if kind is K.Eq:
        return int(vals[0] == vals[1])
    if kind is K.Ne:
        return int(vals[0] != vals[1])
    if kind is K.Ult:
        return int(vals[0] < vals[1])
    if kind is K.Ule:
        return int(vals[0] <= vals[1])
    if kind is K.Ugt:
        return int(vals[0] > vals[1])
    if kind is K.Uge:
        return int(vals[0] >= vals[1])
    if kind in (K.Slt, K.Sle, K.Sgt, K.Sge):
        a, b = to_signed(vals[0], widths[0]), to_signed(vals[1], widths[1])
        if kind is K.Slt:
            return int(a < b)
        if kind is K.Sle:
            return int(a <= b)
        if kind is K.Sgt:
            return int(a > b)
        return int(a >= b)
    if kind is K.BoolAnd:
        return int(all(vals))
    if kind is K.BoolOr:
        return int(any(vals))
    if kind is K.BoolNot:
        return 1 - vals[0]
    raise ValueError(f"no semantics for {kind}")


# --- construction ----------------------------------------------------------

def _check(kind: Kind, args: tuple[Expr, ...], params: tuple) -> tuple[int, bool]:
    """Validate child sorts/widths; return (width, is_bool) of the new node."""
    if kind in ARITH:
        if len(args) < 2 or (kind not in NARY and len(args) != 2):
            raise WidthMismatch(f"{kind.name} takes {'2+' if kind in NARY else 2} operands")
        w = args[0].width
        for a in args:
            if a.is_bool or a.width != w:
                raise WidthMismatch(f"{kind.name} operands must share one bitvector width")
        return w, False
    if kind in UNARY:
        if len(args) != 1 or args[0].is_bool:
            raise WidthMismatch(f"{kind.name} takes one bitvector operand")
        return args[0].width, False
    if kind is K.Concat:
        if not args or any(a.is_bool for a in args):
            raise WidthMismatch("Concat takes bitvector operands")
        return sum(a.width for a in args), False
    if kind is K.Extract:
        hi, lo = params
        if len(args) != 1 or args[0].is_bool or not (0 <= lo <= hi < args[0].width):
            raise WidthMismatch(f"Extract({hi},{lo}) illegal for width {args[0].width if args else '?'}")
        return hi - lo + 1, False
    if kind in (K.ZeroExtend, K.SignExtend):
        (n,) = params
        if len(args) != 1 or args[0].is_bool or n < 0:
            raise WidthMismatch(f"{kind.name} takes one bitvector operand and n >= 0")
        return args[0].width + n, False
    if kind is K.Ite:
        if len(args) != 3 or not args[0].is_bool:
            raise WidthMismatch("Ite takes a boolean condition and two branches")
        a, b = args[1], args[2]
        if a.is_bool != b.is_bool or a.width != b.width:
            raise WidthMismatch("Ite branches must have the same sort")
        return a.width, a.is_bool
    if kind in COMPARE:
        if len(args) != 2:
            raise WidthMismatch(f"{kind.name} takes 2 operands")
        a, b = args
        if a.is_bool != b.is_bool or a.width != b.width:
            raise WidthMismatch(f"{kind.name} operands must have the same sort")
        if a.is_bool and kind not in (K.Eq, K.Ne):
            raise WidthMismatch(f"{kind.name} needs bitvector operands")
        return 1, True
    if kind in (K.BoolAnd, K.BoolOr):
        if any(not a.is_bool for a in args):
            raise WidthMismatch(f"{kind.name} takes boolean operands")
        return 1, True
    if kind is K.BoolNot:
        if len(args) != 1 or not args[0].is_bool:
            raise WidthMismatch("BoolNot takes one boolean operand")
        return 1, True
    raise WidthMismatch(f"mk() cannot build leaf kind {kind.name}; use bv()/var()")


def mk(kind: Kind, children: Iterable[Expr], *params) -> Expr:
    """Build (or fetch) the canonical node for ``kind`` over ``children``."""
    args = tuple(children)
    params = tuple(params)
    width, is_bool = _check(kind, args, params)
    if all(a.is_const for a in args):
        v = apply_op(kind, params, [a.width for a in args], [a.value for a in args], width)
        return boolean(bool(v)) if is_bool else bv(v, width)
    simplified = _simplify(kind, args, params, width)
    if simplified is not None:
        return simplified
    return _intern(kind, args, params, width, is_bool)


def _is_zero(e: Expr) -> bool:
    return e.kind is K.BvConst and e.params[0] == 0


def _is_ones(e: Expr) -> bool:
    return e.kind is K.BvConst and e.params[0] == mask(e.width)


def _simplify(kind: Kind, args: tuple[Expr, ...], params: tuple, width: int) -> Expr | None:
    if kind is K.Add:
        rest = tuple(a for a in args if not _is_zero(a))
        if len(rest) != len(args):
            return rest[0] if len(rest) == 1 else (bv(0, width) if not rest else mk(K.Add, rest))
    elif kind is K.Sub:
        a, b = args
        if _is_zero(b):
            return a
        if a is b:
            return bv(0, width)
    elif kind is K.Mul:
        if any(_is_zero(a) for a in args):
            return bv(0, width)
        rest = tuple(a for a in args if not (a.is_const and a.params[0] == 1))
        if len(rest) != len(args):
            return rest[0] if len(rest) == 1 else (bv(1, width) if not rest else mk(K.Mul, rest))
    elif kind is K.UDiv:
        a, b = args
        if b.is_const and b.params[0] == 1:
            return a
    elif kind is K.And:
        if any(_is_zero(a) for a in args):
            return bv(0, width)
        rest = tuple(dict.fromkeys(a for a in args if not _is_ones(a)))
        if len(rest) != len(args):
            return rest[0] if len(rest) == 1 else (bv(mask(width), width) if not rest else mk(K.And, rest))
    elif kind is K.Or:
        if any(_is_ones(a) for a in args):
            return bv(mask(width), width)
        rest = tuple(dict.fromkeys(a for a in args if not _is_zero(a)))
        if len(rest) != len(args):
            return rest[0] if len(rest) == 1 else (bv(0, width) if not rest else mk(K.Or, rest))
    elif kind is K.Xor:
        if len(args) == 2 and args[0] is args[1]:
            return bv(0, width)
        rest = tuple(a for a in args if not _is_zero(a))
        if len(rest) != len(args):
            return rest[0] if len(rest) == 1 else (bv(0, width) if not rest else mk(K.Xor, rest))
    elif kind is K.Not or kind is K.Neg:
        (a,) = args
        if a.kind is kind:
            return a.args[0]
    elif kind in (K.Shl, K.LShr, K.AShr):
        x, n = args
        if n.is_const:
            c = n.params[0]
            if c == 0:
                return x
            if kind is K.Shl:
                if c >= width:
                    return bv(0, width)
                return mk(K.Concat, (mk(K.Extract, (x,), width - 1 - c, 0), bv(0, c)))
            if kind is K.LShr:
                if c >= width:
                    return bv(0, width)
                return mk(K.ZeroExtend, (mk(K.Extract, (x,), width - 1, c),), c)
            c = min(c, width - 1)
            return mk(K.SignExtend, (mk(K.Extract, (x,), width - 1, c),), c)
    elif kind is K.Extract:
        return _simplify_extract(args[0], *params)
    elif kind is K.Concat:
        return _simplify_concat(args)
    elif kind is K.ZeroExtend or kind is K.SignExtend:
        (a,) = args
        (n,) = params
        if n == 0:
            return a
        if a.kind is kind:
            return mk(kind, a.args, n + a.params[0])
        if kind is K.SignExtend and a.kind is K.ZeroExtend and a.params[0] > 0:
            return mk(K.ZeroExtend, a.args, n + a.params[0])
    elif kind is K.Ite:
        c, a, b = args
        if c.is_const:
            return a if c.params[0] else b
        if a is b:
            return a
        if c.kind is K.BoolNot:
            return mk(K.Ite, (c.args[0], b, a))
        if a.is_bool and a.is_const and b.is_const:
            return c if a.params[0] else mk(K.BoolNot, (c,))
    elif kind in COMPARE:
        a, b = args
        if a is b:
            return boolean(kind in (K.Eq, K.Ule, K.Uge, K.Sle, K.Sge))
        if kind is K.Ult and _is_zero(b) or kind is K.Ugt and _is_zero(a):
            return FALSE
        if kind is K.Uge and _is_zero(b) or kind is K.Ule and _is_zero(a):
            return TRUE
        if kind in (K.Eq, K.Ne) and a.is_bool:
            # boolean equality against a constant collapses to the operand
            if b.is_const:
                a, b = b, a
            if a.is_const:
                pos = bool(a.params[0]) == (kind is K.Eq)
                return b if pos else mk(K.BoolNot, (b,))
    elif kind is K.BoolAnd or kind is K.BoolOr:
        absorbing = FALSE if kind is K.BoolAnd else TRUE
        neutral = TRUE if kind is K.BoolAnd else FALSE
        flat: list[Expr] = []
        for a in args:
            if a is absorbing:
                return absorbing
            if a is neutral:
                continue
            flat.extend(a.args if a.kind is kind else (a,))
        flat = list(dict.fromkeys(flat))
        if not flat:
            return neutral
        if len(flat) == 1:
            return flat[0]
        if tuple(flat) != args:
            return _intern(kind, tuple(flat), (), 1, True)
    elif kind is K.BoolNot:
        (a,) = args
        if a.kind is K.BoolNot:
            return a.args[0]
        if a.kind is K.Eq:
            return mk(K.Ne, a.args)
        if a.kind is K.Ne:
            return mk(K.Eq, a.args)
    return None


def _simplify_extract(x: Expr, hi: int, lo: int) -> Expr | None:
    if lo == 0 and hi == x.width - 1:
        return x
    if x.kind is K.Extract:
        return mk(K.Extract, x.args, hi + x.params[1], lo + x.params[1])
    if x.kind is K.ZeroExtend or x.kind is K.SignExtend:
        inner = x.args[0]
        if hi < inner.width:
            return mk(K.Extract, (inner,), hi, lo)
        if x.kind is K.ZeroExtend and lo >= inner.width:
            return bv(0, hi - lo + 1)
        if x.kind is K.ZeroExtend and lo == 0:
            return mk(K.ZeroExtend, (inner,), hi + 1 - inner.width)
        if x.kind is K.SignExtend and lo == 0:
            return mk(K.SignExtend, (inner,), hi + 1 - inner.width)
    if x.kind is K.Concat:
        # keep only the parts overlapping [lo, hi]; children are MSB first
        parts = []
        pos = x.width
        for part in x.args:
            top, bot = pos - 1, pos - part.width
            pos = bot
            if bot > hi or top < lo:
                continue
            h, l = min(hi, top) - bot, max(lo, bot) - bot
            parts.append(mk(K.Extract, (part,), h, l))
        return mk(K.Concat, parts) if len(parts) > 1 else parts[0]
    return None


def _simplify_concat(args: tuple[Expr, ...]) -> Expr | None:
    flat: list[Expr] = []
    for a in args:
        flat.extend(a.args if a.kind is K.Concat else (a,))
    merged: list[Expr] = []
    for a in flat:
        if merged:
            prev = merged[-1]
            if prev.is_const and a.is_const:
                merged[-1] = bv((prev.params[0] << a.width) | a.params[0], prev.width + a.width)
                continue
            if (prev.kind is K.Extract and a.kind is K.Extract and prev.args[0] is a.args[0]
                    and prev.params[1] == a.params[0] + 1):
                merged[-1] = mk(K.Extract, a.args, prev.params[0], a.params[1])
                continue
        merged.append(a)
    if len(merged) == 1:
        return merged[0]
    if _is_zero(merged[0]):
        return mk(K.ZeroExtend, (mk(K.Concat, merged[1:]),), merged[0].width)
    if tuple(merged) != args:
        return _intern(K.Concat, tuple(merged), (), sum(a.width for a in merged), False)
    return None


# --- convenience constructors ---------------------------------------------

def add(*xs): return mk(K.Add, xs)
def sub(a, b): return mk(K.Sub, (a, b))
def mul(*xs): return mk(K.Mul, xs)
def udiv(a, b): return mk(K.UDiv, (a, b))
def band(*xs): return mk(K.And, xs)
def bor(*xs): return mk(K.Or, xs)
def bxor(*xs): return mk(K.Xor, xs)
def bnot(a): return mk(K.Not, (a,))
def neg(a): return mk(K.Neg, (a,))
def shl(a, b): return mk(K.Shl, (a, b))
def lshr(a, b): return mk(K.LShr, (a, b))
def ashr(a, b): return mk(K.AShr, (a, b))
def concat(*xs): return mk(K.Concat, xs)
def extract(x, hi, lo): return mk(K.Extract, (x,), hi, lo)
def zext(x, n): return mk(K.ZeroExtend, (x,), n)
def sext(x, n): return mk(K.SignExtend, (x,), n)
def ite(c, a, b): return mk(K.Ite, (c, a, b))
def eq(a, b): return mk(K.Eq, (a, b))
def ne(a, b): return mk(K.Ne, (a, b))
def ult(a, b): return mk(K.Ult, (a, b))
def ule(a, b): return mk(K.Ule, (a, b))
def ugt(a, b): return mk(K.Ugt, (a, b))
def uge(a, b): return mk(K.Uge, (a, b))
def slt(a, b): return mk(K.Slt, (a, b))
def sle(a, b): return mk(K.Sle, (a, b))
def sgt(a, b): return mk(K.Sgt, (a, b))
def sge(a, b): return mk(K.Sge, (a, b))
def land(*xs): return mk(K.BoolAnd, xs)
def lor(*xs): return mk(K.BoolOr, xs)
def lnot(a): return mk(K.BoolNot, (a,))


def resize(x: Expr, width: int, signed: bool = False) -> Expr:
    """Truncate or extend ``x`` to ``width`` bits."""
    if width == x.width:
        return x
    if width < x.width:
        return extract(x, width - 1, 0)
    return sext(x, width - x.width) if signed else zext(x, width - x.width)


def const_like(value: int, x: Expr) -> Expr:
    return bv(value, x.width)


def to_str(e: Expr, depth: int = 6) -> str:
    if e.kind is K.BvConst:
        return f"{e.params[0]:#x}:{e.width}"
    if e.kind is K.BoolConst:
        return "true" if e.params[0] else "false"
    if e.kind is K.BvVar:
        return e.params[0]
    if depth <= 0:
        return "…"
    head = e.kind.name
    if e.params:
        head += "(" + ",".join(map(str, e.params)) + ")"
    return f"{head}[{', '.join(to_str(a, depth - 1) for a in e.args)}]"
