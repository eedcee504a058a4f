"""Reference C-library behaviour over plain byte strings.

These are the concrete semantics of the VM intrinsics and the oracles the
symbolic models are checked against.
"""

from __future__ import annotations

SPACES = b" \t\n\v\f\r"


def digit_value(c: int) -> int:
    """Value of an alphanumeric digit character, or 99 when not a digit."""
    if 48 <= c <= 57:
        return c - 48
    if 97 <= c <= 122:
        return c - 97 + 10
    if 65 <= c <= 90:
        return c - 65 + 10
    return 99


def scan_number(s: bytes, base: int):
    """Split ``s`` into the strto* layout.

    Returns ``(spaces, sign_index, prefix_len, base, digits_start, digits_end)``
    where ``sign_index`` is None when no sign is present.  ``digits_end ==
    digits_start`` means no conversion was performed.
    """
    i = 0
    while i < len(s) and s[i] in SPACES:
        i += 1
    spaces = i
    sign = None
    if i < len(s) and s[i] in b"+-":
        sign = i
        i += 1
    prefix = 0
    has_hex = (s[i:i + 1] == b"0" and s[i + 1:i + 2] in (b"x", b"X")
               and i + 2 < len(s) and digit_value(s[i + 2]) < 16)
    if base == 0:
        if has_hex:
            base, prefix = 16, 2
        elif s[i:i + 1] == b"0":
            base = 8
        else:
            base = 10
    elif base == 16 and has_hex:
        prefix = 2
    start = i + prefix
    j = start
    while j < len(s) and digit_value(s[j]) < base:
        j += 1
    return spaces, sign, prefix, base, start, j


def strtol(s: bytes, base: int = 10, width: int = 64, unsigned: bool = False) -> tuple[int, int]:
    """C99 strto(u)l: returns (value as an unsigned ``width``-bit pattern, end index)."""
    if base != 0 and not 2 <= base <= 36:
        return 0, 0
    spaces, sign, prefix, base, start, end = scan_number(s, base)
    if end == start:
        return 0, 0
    mag = 0
    for c in s[start:end]:
        mag = mag * base + digit_value(c)
    neg = sign is not None and s[sign] == ord("-")
    m = (1 << width) - 1
    if unsigned:
        if mag > m:
            return m, end
        return (-mag if neg else mag) & m, end
    value = -mag if neg else mag
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    value = max(lo, min(hi, value))
    return value & m, end


def atoi(s: bytes) -> int:
    """glibc atoi: ``(int) strtol(s, NULL, 10)``, as a 32-bit pattern."""
    return strtol(s, 10)[0] & 0xFFFFFFFF


def strlen(s: bytes) -> int:
    n = s.find(b"\0")
    return len(s) if n < 0 else n


def memchr(s: bytes, ch: int, count: int) -> int | None:
    n = s[:count].find(bytes([ch & 0xFF]))
    return None if n < 0 else n


def strchr(s: bytes, ch: int) -> int | None:
    """Index of the first ``ch`` in the string (the terminator counts when ch == 0)."""
    ch &= 0xFF
    for i, c in enumerate(s):
        if c == ch:
            return i
        if c == 0:
            return None
    return None


def sign(v: int) -> int:
    return (v > 0) - (v < 0)


def memcmp(a: bytes, b: bytes, count: int) -> int:
    for x, y in zip(a[:count], b[:count]):
        if x != y:
            return x - y
    return 0


def strncmp(a: bytes, b: bytes, count: int) -> int:
    for x, y in zip(a[:count], b[:count]):
        if x != y:
            return sign(x - y)
        if x == 0:
            return 0
    return 0


def strcmp(a: bytes, b: bytes) -> int:
    return strncmp(a, b, max(len(a), len(b)))


def strstr(hay: bytes, needle: bytes) -> int | None:
    hay = hay[:strlen(hay)]
    needle = needle[:strlen(needle)]
    n = hay.find(needle)
    return None if n < 0 else n
