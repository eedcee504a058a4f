"""Symbolic memory effects of heap, copy and print intrinsics."""

from __future__ import annotations

from ..smt import expr as E


def copy_bytes(state, dst: int, src: int, n: int):
    """Move symbolic bytes from ``src`` to ``dst``; overlapping ranges behave like memmove."""
    if not state.mem:
        return
    moved = [state.mem.get(src + k) for k in range(n)] if n <= len(state.mem) * 4 else None
    if moved is None:
        moved = [None] * n
        for a, e in state.mem.items():
            if src <= a < src + n:
                moved[a - src] = e
    state.clear(dst, n)
    for k, e in enumerate(moved):
        if e is not None:
            state.mem[dst + k] = e


def terminator_constraints(state, src: int, length: int, terminated: bool = True):
    """Pin a copied string's length: its bytes stay non-zero and its terminator stays zero."""
    conds = []
    zero = E.bv(0, 8)
    for k in range(length):
        e = state.mem.get(src + k)
        if e is not None:
            conds.append(E.eq(e, zero) if terminated and k == length - 1 else E.ne(e, zero))
    return conds


def apply(session, ev, arg_exprs) -> bool:
    """Update symbolic memory for a side-effect intrinsic; False when not one."""
    name, args, st = ev.name, ev.args, session.state
    address = ev.inst.address
    if name in ("memcpy", "memmove"):
        session.pin(arg_exprs[2], args[2], address)
        copy_bytes(st, args[0], args[1], args[2])
    elif name == "memset":
        session.pin(arg_exprs[2], args[2], address)
        c = arg_exprs[1]
        byte = E.extract(c, 7, 0) if c is not None else None
        st.clear(args[0], args[2])
        if byte is not None:
            for k in range(args[2]):
                st.set_byte(args[0] + k, byte)
    elif name == "strcpy":
        length = ev.touched[0][1] if ev.touched else 0
        for cond in terminator_constraints(st, args[1], length):
            session.constrain(cond, address, "pin")
        copy_bytes(st, args[0], args[1], length)
    elif name == "strncpy":
        session.pin(arg_exprs[2], args[2], address)
        copied = ev.info.get("copied", 0)
        terminated = copied < args[2]
        scanned = copied + 1 if terminated else copied
        for cond in terminator_constraints(st, args[1], scanned, terminated):
            session.constrain(cond, address, "pin")
        st.clear(args[0], args[2])
        copy_bytes(st, args[0], args[1], copied)
    elif name == "realloc":
        if ev.ret:
            kept = ev.info.get("kept", 0)
            old = ev.info.get("old_base", 0)
            if old:
                copy_bytes(st, ev.ret, old, kept)
                st.clear(old, ev.info.get("old_size", 0))
    elif name == "free":
        size = session.checker.heap.size_of(args[0]) if args[0] else None
        if size:
            st.clear(args[0], size)
    elif name == "calloc":
        for start, length in ev.touched:
            st.clear(start, length)
    elif name not in ("malloc", "print"):
        return False
    return True
