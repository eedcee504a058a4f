"""Return-value formulas for the string search, comparison and conversion intrinsics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..smt import expr as E
from ..smt.expr import FALSE, TRUE, Expr
from ..vm import libc

SCAN_CAP = 4096
CMP_WIDTH = 32


class ModelSkipped(Exception):
    """No formula is needed (or possible); the caller concretizes the return."""


class NoDigits(ModelSkipped):
    pass


class BufferView:
    """Per-byte access to memory: symbolic expression and concrete value."""

    def __init__(self, sym: dict, conc):
        self._sym = sym
        self._conc = conc

    def conc(self, addr: int) -> int:
        return self._conc(addr)

    def sym(self, addr: int) -> Expr:
        e = self._sym.get(addr)
        return e if e is not None else E.bv(self._conc(addr), 8)

    @classmethod
    def from_bytes(cls, base: int, data: bytes, symbolic: dict[int, Expr] | None = None):
        """A view over ``data`` at ``base``; ``symbolic`` maps offsets to expressions."""
        sym = {base + k: e for k, e in (symbolic or {}).items()}
        return cls(sym, lambda a: data[a - base] if 0 <= a - base < len(data) else 0)


@dataclass
class ConversionModel:
    spaces: range
    sign: int | None
    prefix: range
    digits: range  # positions of c_n .. c_0
    invalid: int  # first byte after the digits
    base: int
    width: int
    digit_exprs: list[Expr]
    magnitude: Expr
    value_wide: Expr
    validity: list[Expr]
    range_constraints: list[Expr]
    sign_expr: Expr | None
    unsigned: bool = False

    @property
    def n(self) -> int:
        return len(self.digits) - 1


@dataclass
class ModelResult:
    value: Expr  # modeled return value at return width
    constraints: list = field(default_factory=list)  # (boolean Expr, kind)
    tie: str = "equal"  # or "sign"
    install: Expr | None = None  # what the return register becomes
    provenance: str | None = None
    conversion: ConversionModel | None = None

    def __post_init__(self):
        if self.install is None:
            self.install = self.value


def _all_const(exprs) -> bool:
    return all(e.is_const for e in exprs)


def _prefix_and(conds: list[Expr]) -> list[Expr]:
    out, acc = [], TRUE
    for c in conds:
        acc = E.land(acc, c)
        out.append(acc)
    return out


def _count(prefixes: list[Expr], width: int = 64) -> Expr:
    one, zero = E.bv(1, width), E.bv(0, width)
    terms = [E.ite(p, one, zero) for p in prefixes]
    return E.add(*terms) if len(terms) > 1 else (terms[0] if terms else zero)


def string_bytes(view: BufferView, addr: int, limit: int | None = None) -> list[Expr]:
    """Bytes of a string up to and including its first constant zero byte.

    A symbolic byte never ends the scan, so the formula covers every value the
    symbolic bytes can take.  ``limit`` caps the scan (strncmp-style counts).
    """
    out = []
    cap = SCAN_CAP if limit is None else min(limit, SCAN_CAP)
    for k in range(cap):
        e = view.sym(addr + k)
        out.append(e)
        if e.is_const and e.value == 0:
            break
    return out


# search ----------------------------------------------------------------------

def memchr_formula(ptr: int, data: list[Expr], ch: Expr) -> Expr:
    miss = [E.ne(b, ch) for b in data]
    prefixes = _prefix_and(miss)
    if not data:
        return E.bv(0, 64)
    return E.ite(prefixes[-1], E.bv(0, 64), E.add(E.bv(ptr, 64), _count(prefixes)))


def model_memchr(view: BufferView, ptr: int, ch: Expr, count: int) -> ModelResult:
    data = [view.sym(ptr + k) for k in range(min(count, SCAN_CAP))]
    if _all_const(data) and ch.is_const:
        raise ModelSkipped("memchr over concrete bytes")
    return ModelResult(memchr_formula(ptr, data, ch))


def model_strlen(view: BufferView, ptr: int) -> ModelResult:
    data = string_bytes(view, ptr)
    if _all_const(data):
        raise ModelSkipped("strlen over concrete bytes")
    zero = E.bv(0, 8)
    return ModelResult(_count(_prefix_and([E.ne(b, zero) for b in data])))


def model_strchr(view: BufferView, ptr: int, ch: Expr) -> ModelResult:
    data = string_bytes(view, ptr)
    if _all_const(data) and ch.is_const:
        raise ModelSkipped("strchr over concrete bytes")
    zero = E.bv(0, 8)
    cont = [E.land(E.ne(b, ch), E.ne(b, zero)) for b in data]
    prefixes = _prefix_and(cont)
    matches = [E.land(prefixes[i - 1] if i else TRUE, E.eq(b, ch)) for i, b in enumerate(data)]
    found = E.lor(*matches) if len(matches) > 1 else matches[0]
    value = E.ite(found, E.add(E.bv(ptr, 64), _count(prefixes)), E.bv(0, 64))
    return ModelResult(value)


def model_strstr(view: BufferView, hay: int, needle: int) -> ModelResult:
    """First match position; a symbolic needle byte may end the needle early."""
    h = string_bytes(view, hay)
    n = string_bytes(view, needle)
    if n and n[-1].is_const and n[-1].value == 0:
        n = n[:-1]
    if _all_const(h) and _all_const(n):
        raise ModelSkipped("strstr over concrete bytes")
    if not n:
        return ModelResult(E.bv(hay, 64))
    zero = E.bv(0, 8)
    # ended[j]: the needle terminated before byte j
    ended = [FALSE]
    for b in n:
        ended.append(E.lor(ended[-1], E.eq(b, zero)))
    matches = []
    for k in range(len(h)):
        conds = [E.ne(h[t], zero) for t in range(k)]
        for j, b in enumerate(n):
            done = E.lor(ended[j], E.eq(b, zero))
            conds.append(E.lor(done, E.eq(h[k + j], b)) if k + j < len(h) else done)
        matches.append(E.land(*conds) if len(conds) > 1 else conds[0])
    misses = _prefix_and([E.lnot(c) for c in matches])
    value = E.ite(misses[-1], E.bv(0, 64), E.add(E.bv(hay, 64), _count(misses)))
    return ModelResult(value)


# comparison ------------------------------------------------------------------

def _diff(a: Expr, b: Expr) -> Expr:
    return E.sub(E.zext(a, CMP_WIDTH - 8), E.zext(b, CMP_WIDTH - 8))


def memcmp_formula(lhs: list[Expr], rhs: list[Expr], strings: bool) -> Expr:
    """lhs[0]-rhs[0] + sum over i>=1 of (lhs[i]-rhs[i]) while all earlier bytes agreed."""
    zero8 = E.bv(0, 8)
    zero = E.bv(0, CMP_WIDTH)
    if not lhs:
        return zero
    same = [E.land(E.eq(a, b), E.ne(a, zero8)) if strings else E.eq(a, b) for a, b in zip(lhs, rhs)]
    prefixes = _prefix_and(same)
    terms = [_diff(lhs[0], rhs[0])]
    for i in range(1, len(lhs)):
        terms.append(E.ite(prefixes[i - 1], _diff(lhs[i], rhs[i]), zero))
    return E.add(*terms) if len(terms) > 1 else terms[0]


def sign_normalize(x: Expr) -> Expr:
    """The {-1, 0, 1} ABI value of a comparison result."""
    w = x.width
    zero = E.bv(0, w)
    return E.ite(E.slt(x, zero), E.bv(E.mask(w), w), E.ite(E.eq(x, zero), zero, E.bv(1, w)))


def sign_class(x: Expr, concrete: int) -> Expr:
    """x lies in the same sign class as the concrete (signed) return value."""
    zero = E.bv(0, x.width)
    c = E.to_signed(concrete, x.width)
    if c < 0:
        return E.slt(x, zero)
    if c == 0:
        return E.eq(x, zero)
    return E.sgt(x, zero)


def model_memcmp(view: BufferView, a: int, b: int, count: int) -> ModelResult:
    count = min(count, SCAN_CAP)
    lhs = [view.sym(a + k) for k in range(count)]
    rhs = [view.sym(b + k) for k in range(count)]
    if _all_const(lhs) and _all_const(rhs):
        raise ModelSkipped("memcmp over concrete bytes")
    return ModelResult(memcmp_formula(lhs, rhs, strings=False))


def model_strcmp(view: BufferView, a: int, b: int, limit: int | None = None) -> ModelResult:
    lhs = string_bytes(view, a, limit)
    rhs = string_bytes(view, b, limit)
    # the comparison ends at the first constant terminator on either side
    n = min(len(lhs), len(rhs))
    lhs, rhs = lhs[:n], rhs[:n]
    if _all_const(lhs) and _all_const(rhs):
        raise ModelSkipped("strcmp over concrete bytes")
    m = memcmp_formula(lhs, rhs, strings=True)
    return ModelResult(m, tie="sign", install=sign_normalize(m))


# conversion ------------------------------------------------------------------

def _in(c: Expr, lo: int, hi: int) -> Expr:
    """lo <= c <= hi over unsigned bytes (empty range is false)."""
    if hi < lo:
        return FALSE
    return E.land(E.uge(c, E.bv(lo, 8)), E.ule(c, E.bv(hi, 8)))


def valid_digit(c: Expr, base: int) -> Expr:
    """Whether one character is a valid digit in ``base``."""
    return E.lor(_in(c, 48, min(57, 48 + base - 1)),
                 _in(c, 97, 97 + base - 11), _in(c, 65, 65 + base - 11))


def digit_expr(c: Expr, base: int) -> Expr:
    """Character to digit value: decimal, lowercase or uppercase arm."""
    if base <= 10:
        return E.sub(c, E.bv(48, 8))  # letters are never valid
    return E.ite(_in(c, 48, min(57, 48 + base - 1)), E.sub(c, E.bv(48, 8)),
                 E.ite(_in(c, 97, 97 + base - 11), E.sub(c, E.bv(87, 8)), E.sub(c, E.bv(55, 8))))


def _is_space(c: Expr) -> Expr:
    return E.lor(*[E.eq(c, E.bv(s, 8)) for s in libc.SPACES])


def model_strtol(view: BufferView, ptr: int, base: int, width: int = 64, unsigned: bool = False,
                 concrete: int | None = None) -> ModelResult:
    data = string_bytes(view, ptr)
    conc = bytes(view.conc(ptr + k) for k in range(len(data)))
    conc = conc[:libc.strlen(conc)]
    if base != 0 and not 2 <= base <= 36:
        raise ModelSkipped(f"invalid base {base}")
    spaces, sign, prefix, b, start, end = libc.scan_number(conc, base)
    if end == start:
        raise NoDigits("no digits were parsed")
    used = data[:end + 1]
    if _all_const(used):
        raise ModelSkipped("conversion of concrete bytes")
    cons: list[tuple[Expr, str]] = []

    def need(c: Expr, kind: str = "model"):
        if not c.is_const:
            cons.append((c, kind))

    for k in range(spaces):
        need(_is_space(data[k]))
    neg = FALSE
    sign_expr = None
    if sign is not None:
        sign_expr = data[sign]
        plus, minus = E.eq(sign_expr, E.bv(43, 8)), E.eq(sign_expr, E.bv(45, 8))
        if unsigned and conc[sign] != 45:
            need(plus, "pin")
        else:
            need(E.lor(plus, minus))
            neg = minus
    for k in range(sign + 1 if sign is not None else spaces, start):
        need(E.eq(data[k], E.bv(conc[k], 8)), "pin")
    digits = list(range(start, end))
    space_trick = base == 0 and b == 10 and sign is None and len(digits) > 1
    validity = []
    a = []
    for i, k in enumerate(digits):
        c = data[k]
        valid = valid_digit(c, b)
        if space_trick and i < len(digits) - 1:
            sp = E.eq(c, E.bv(32, 8))
            validity.append(E.lor(sp, valid))
            a.append(E.ite(sp, E.bv(0, 8), digit_expr(c, b)))
            nxt = data[digits[i + 1]]
            # a space never follows a digit
            need(E.lor(sp, E.ne(nxt, E.bv(32, 8))))
            # the first real digit of a decimal number must not read as an octal prefix
            lead = E.land(*[E.eq(data[j], E.bv(32, 8)) for j in digits[:i]]) if i else TRUE
            need(E.lor(E.lnot(lead), sp, E.ne(c, E.bv(48, 8))))
        else:
            validity.append(valid)
            a.append(digit_expr(c, b))
    for v in validity:
        need(v)
    if base == 0 and b == 8:
        need(E.eq(data[start], E.bv(48, 8)), "pin")
    elif base == 0 and b == 10 and not space_trick and len(digits) > 1:
        need(E.ne(data[start], E.bv(48, 8)))
    if end < len(data):
        need(E.lnot(valid_digit(data[end], b)))
    if base in (0, 16) and prefix == 0 and start + 2 < len(data):
        # a "0x" the concrete parse did not see would switch to hexadecimal
        x = data[start + 1]
        hex_prefix = E.land(E.eq(data[start], E.bv(48, 8)),
                            E.lor(E.eq(x, E.bv(120, 8)), E.eq(x, E.bv(88, 8))), valid_digit(data[start + 2], 16))
        need(E.lnot(hex_prefix))
    wide = max(2 * width, math.ceil(math.log2(b) * len(digits)) + 2)
    # digit values are below 36, so six bits carry them into the wide sum
    terms = [E.mul(E.zext(E.extract(d, 5, 0), wide - 6), E.bv(b ** (len(digits) - 1 - i), wide))
             for i, d in enumerate(a)]
    magnitude = E.add(*terms) if len(terms) > 1 else terms[0]
    x = E.ite(neg, E.neg(magnitude), magnitude)
    if unsigned:
        ranges = [E.ule(magnitude, E.bv(E.mask(width), wide))]
    else:
        ranges = [E.sge(x, E.bv(-(1 << (width - 1)), wide)), E.sle(x, E.bv((1 << (width - 1)) - 1, wide))]
    for r in ranges:
        need(r)
    value = E.extract(x, width - 1, 0)
    conv = ConversionModel(range(spaces), sign, range((sign + 1) if sign is not None else spaces, start),
                           range(start, end), end, b, width, a, magnitude, x, validity, ranges,
                           sign_expr, unsigned)
    return ModelResult(value, cons, provenance="unsigned" if unsigned else "signed", conversion=conv)


STRTO = {"strtol": (64, False), "strtoll": (64, False), "strtoul": (64, True), "strtoull": (64, True)}
SEARCH = ("memchr", "strchr", "strlen", "strstr")
COMPARE = ("memcmp", "strcmp", "strncmp")
CONVERT = tuple(STRTO) + ("atoi",)
SIDE_EFFECT = ("malloc", "calloc", "realloc", "free", "memcpy", "memmove", "memset",
               "strcpy", "strncpy", "print")
MODELED = SEARCH + COMPARE + CONVERT


def model_call(name: str, args: tuple, view: BufferView, ch: Expr | None = None) -> ModelResult:
    """Dispatch on intrinsic name; ``ch`` is the (possibly symbolic) character argument."""
    if name == "memchr":
        return model_memchr(view, args[0], ch if ch is not None else E.bv(args[1] & 0xFF, 8), args[2])
    if name == "strchr":
        return model_strchr(view, args[0], ch if ch is not None else E.bv(args[1] & 0xFF, 8))
    if name == "strlen":
        return model_strlen(view, args[0])
    if name == "strstr":
        return model_strstr(view, args[0], args[1])
    if name == "memcmp":
        return model_memcmp(view, args[0], args[1], args[2])
    if name == "strcmp":
        return model_strcmp(view, args[0], args[1])
    if name == "strncmp":
        return model_strcmp(view, args[0], args[1], args[2])
    if name in STRTO:
        width, unsigned = STRTO[name]
        return model_strtol(view, args[0], args[2], width, unsigned)
    if name == "atoi":
        return model_strtol(view, args[0], 10, 32, False)
    raise ModelSkipped(f"no model for {name}")


def return_width(name: str) -> int:
    return CMP_WIDTH if name in COMPARE or name == "atoi" else 64
