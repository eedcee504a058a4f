"""x86-style result and flag computation for MiniVM arithmetic."""

from __future__ import annotations


def _mask(w: int) -> int:
    return (1 << w) - 1


def _signed(v: int, w: int) -> int:
    v &= _mask(w)
    return v - (1 << w) if v >> (w - 1) else v


def shift_count(count: int, width: int) -> int:
    return count & (63 if width == 64 else 31)


def flag_semantics(mnemonic: str, width: int, a: int, b: int = 0, cin: int = 0):
    """Return ``(result, CF, OF, ZF, SF)`` for one operation.

    Shift counts are masked like x86.  A masked count of zero leaves the
    flags unchanged; callers detect that case themselves.
    """
    m = _mask(width)
    top = width - 1
    a &= m
    b &= m
    cf = of = 0
    if mnemonic in ("add", "adc"):
        c = cin if mnemonic == "adc" else 0
        wide = a + b + c
        r = wide & m
        cf = int(wide > m)
        of = int(_signed(a, width) + _signed(b, width) + c != _signed(r, width))
    elif mnemonic in ("sub", "sbb", "cmp"):
        c = cin if mnemonic == "sbb" else 0
        wide = a - b - c
        r = wide & m
        cf = int(wide < 0)
        of = int(_signed(a, width) - _signed(b, width) - c != _signed(r, width))
    elif mnemonic == "neg":
        r = -a & m
        cf = int(a != 0)
        of = int(a == 1 << top)
    elif mnemonic == "mul":
        wide = a * b
        r = wide & m
        cf = of = int(wide > m)
    elif mnemonic == "imul":
        wide = _signed(a, width) * _signed(b, width)
        r = wide & m
        cf = of = int(wide != _signed(r, width))
    elif mnemonic in ("and", "test"):
        r = a & b
    elif mnemonic == "or":
        r = a | b
    elif mnemonic == "xor":
        r = a ^ b
    elif mnemonic in ("shl", "sal"):
        n = shift_count(b, width)
        r = (a << n) & m
        if n:
            cf = (a >> (width - n)) & 1 if n <= width else 0
            of = ((r >> top) & 1) ^ cf if n == 1 else 0
    elif mnemonic == "shr":
        n = shift_count(b, width)
        r = a >> n if n < width else 0
        if n:
            cf = (a >> (n - 1)) & 1 if n <= width else 0
            of = (a >> top) & 1 if n == 1 else 0
    elif mnemonic == "sar":
        n = shift_count(b, width)
        r = (_signed(a, width) >> min(n, width)) & m
        if n:
            cf = (_signed(a, width) >> (min(n, width + 1) - 1)) & 1
    elif mnemonic == "div":
        r = a // b if b else 0
    elif mnemonic == "not":
        r = ~a & m
    else:
        raise ValueError(f"no flag semantics for {mnemonic}")
    return r, cf, of, int(r == 0), (r >> top) & 1


def shift_overflow(width: int, value: int, count: int) -> tuple[int, int]:
    """(unsigned, signed) overflow of a left shift: did significant bits fall off?"""
    n = shift_count(count, width)
    wide = (value & _mask(width)) << n
    r = wide & _mask(width)
    unsigned = int(wide != r)
    signed = int(_signed(value, width) << n != _signed(r, width))
    return unsigned, signed


def overflow_condition(mnemonic: str, width: int, a: int, b: int = 0, cin: int = 0) -> tuple[int, int]:
    """Reference (unsigned, signed) overflow of one arithmetic operation.

    Unlike raw x86 flags this treats ``add`` of a negative immediate as a
    subtraction and reports the unsigned and signed multiply conditions
    separately, which is what a report about an overflow means.
    """
    a &= _mask(width)
    b &= _mask(width)
    if mnemonic in ("shl", "sal"):
        return shift_overflow(width, a, b)
    if mnemonic in ("mul", "imul"):
        return flag_semantics("mul", width, a, b)[1], flag_semantics("imul", width, a, b)[2]
    if mnemonic == "neg":
        _, cf, of, _, _ = flag_semantics("neg", width, a)
        return cf, of
    if mnemonic in ("add", "adc", "sub", "sbb"):
        _, cf, of, _, _ = flag_semantics(mnemonic, width, a, b, cin)
        return cf, of
    return 0, 0


SIGNED_JUMPS = {"js", "jns", "jg", "jge", "jl", "jle"}
UNSIGNED_JUMPS = {"ja", "jae", "jb", "jbe"}
AMBIGUOUS_JUMPS = {"jz", "jnz"}
CONDITIONAL_JUMPS = SIGNED_JUMPS | UNSIGNED_JUMPS | AMBIGUOUS_JUMPS


def branch_taken(mnemonic: str, cf: int, of: int, zf: int, sf: int) -> bool:
    if mnemonic == "jz":
        return bool(zf)
    if mnemonic == "jnz":
        return not zf
    if mnemonic == "js":
        return bool(sf)
    if mnemonic == "jns":
        return not sf
    if mnemonic == "jg":
        return not zf and sf == of
    if mnemonic == "jge":
        return sf == of
    if mnemonic == "jl":
        return sf != of
    if mnemonic == "jle":
        return bool(zf) or sf != of
    if mnemonic == "ja":
        return not cf and not zf
    if mnemonic == "jae":
        return not cf
    if mnemonic == "jb":
        return bool(cf)
    if mnemonic == "jbe":
        return bool(cf) or bool(zf)
    raise ValueError(f"not a conditional jump: {mnemonic}")
