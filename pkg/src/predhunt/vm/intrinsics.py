"""Concrete implementations of the ``icall`` library intrinsics."""

from __future__ import annotations

from . import libc
from .events import InputRead, IntrinsicCall, _Fault
from .isa import MAX_ALLOC

MASK64 = (1 << 64) - 1
INT_RETURNING = {"strcmp", "strncmp", "memcmp", "atoi"}
SIZED = {"memcpy", "memmove", "memset", "strncpy", "memchr", "memcmp", "strncmp"}
STRTO = {"strtol": (64, False), "strtoll": (64, False), "strtoul": (64, True), "strtoull": (64, True)}


def _string(vm, addr: int) -> bytes:
    """Bytes of a C string including its terminator."""
    return vm.read_cstring(addr) + b"\0"


def _copy(vm, dst: int, data: bytes) -> list:
    vm.write_bytes(dst, data)
    return [(dst, len(data))] if data else []


def dispatch(vm, inst):
    name = inst.intrinsic
    args = tuple(vm.regs[:6])
    a0, a1, a2 = args[0], args[1], args[2]
    if name in SIZED and a2 >= MAX_ALLOC:
        # no mapping is that large; the first unmapped byte faults
        raise _Fault("OutOfBounds", a0)
    touched: list = []
    info: dict = {}
    ret = None
    if name in ("read", "read_num_scanf_quirk"):
        data = vm.input[vm.cursor:vm.cursor + a1]
        start = vm.cursor
        vm.write_bytes(a0, data)
        vm.cursor += len(data)
        vm.regs[0] = len(data)
        return InputRead(inst, a0, len(data), data, range(start, start + len(data)),
                         name == "read_num_scanf_quirk")
    if name == "malloc":
        ret = vm.allocate(a0)
    elif name == "calloc":
        ret = vm.allocate(a0 * a1)  # fresh blocks already read as zero
        if ret:
            touched = [(ret, a0 * a1)] if a0 * a1 else []
    elif name == "realloc":
        old = vm.blocks.get(a0) if a0 else 0
        if a0 and old is None:
            if vm.checked:
                raise _Fault("OutOfBounds", a0)
            old = 0
        ret = vm.allocate(a1)
        if ret:
            keep = min(old or 0, a1)
            data = bytes(vm.mem.get(a0 + k, 0) for k in range(keep))
            touched = _copy(vm, ret, data)
            info["old_base"], info["old_size"], info["kept"] = a0, old or 0, keep
            if a0:
                vm.release(a0)
    elif name == "free":
        if a0 and not vm.release(a0):
            info["bad_free"] = True
            if vm.checked:
                raise _Fault("OutOfBounds", a0)
    elif name in ("memcpy", "memmove"):
        touched = _copy(vm, a0, vm.read_bytes(a1, a2))
        ret = a0
    elif name == "memset":
        if a2:
            vm.write_bytes(a0, bytes([a1 & 0xFF]) * a2)
            touched = [(a0, a2)]
        ret = a0
    elif name == "strcpy":
        touched = _copy(vm, a0, _string(vm, a1))
        ret = a0
    elif name == "strncpy":
        src = vm.read_cstring(a1, a2)
        touched = _copy(vm, a0, src + bytes(a2 - len(src)))
        info["copied"] = len(src)
        ret = a0
    elif name == "strlen":
        ret = len(vm.read_cstring(a0))
    elif name == "strchr":
        s = _string(vm, a0)
        k = libc.strchr(s, a1)
        ret = 0 if k is None else a0 + k
        info["scanned"] = len(s)
    elif name == "memchr":
        k = libc.memchr(vm.read_bytes(a0, a2), a1, a2)
        ret = 0 if k is None else a0 + k
    elif name == "strcmp":
        ret = libc.strcmp(_string(vm, a0), _string(vm, a1))
    elif name == "strncmp":
        ret = libc.strncmp(vm.read_cstring(a0, a2) + b"\0", vm.read_cstring(a1, a2) + b"\0", a2)
    elif name == "memcmp":
        ret = libc.memcmp(vm.read_bytes(a0, a2), vm.read_bytes(a1, a2), a2)
    elif name == "strstr":
        k = libc.strstr(_string(vm, a0), _string(vm, a1))
        ret = 0 if k is None else a0 + k
    elif name in STRTO or name == "atoi":
        s = _string(vm, a0)
        if name == "atoi":
            ret, end = libc.strtol(s, 10)
            ret &= 0xFFFFFFFF
        else:
            width, unsigned = STRTO[name]
            ret, end = libc.strtol(s, a2, width, unsigned)
            if a1:
                vm.write_int(a1, a0 + end, 8)
                touched = [(a1, 8)]
        info["end"] = end
    elif name == "print":
        vm.output.append(args[:2])
    else:  # pragma: no cover - the assembler rejects unknown names
        raise _Fault("OutOfBounds")
    if ret is not None:
        ret = ret & 0xFFFFFFFF if name in INT_RETURNING else ret & MASK64
        vm.regs[0] = ret
    return IntrinsicCall(inst, name, args, ret, touched, info)
