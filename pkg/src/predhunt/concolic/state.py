"""Symbolic state, path constraints and the call stack of a concolic session."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..smt import expr as E
from ..smt.analysis import evaluate
from ..smt.expr import Expr

INPUT_PREFIX = "b"


def input_var(offset: int) -> Expr:
    return E.var(f"{INPUT_PREFIX}{offset}", 8)


def var_offset(name: str) -> int | None:
    if name.startswith(INPUT_PREFIX) and name[len(INPUT_PREFIX):].isdigit():
        return int(name[len(INPUT_PREFIX):])
    return None


@dataclass
class PathConstraint:
    constraint: Expr
    address: int
    callsite: int | None
    mnemonic: str | None = None
    index: int = 0
    kind: str = "branch"  # branch | model | pin | tie
    trace_index: int | None = None  # position in the VM branch trace
    taken: bool | None = None

    @property
    def vars(self) -> frozenset[str]:
        return self.constraint.vars


class PathPredicate(list):
    """Path constraints in execution order; indices stay dense."""

    def add(self, constraint: Expr, address: int, callsite: int | None, mnemonic: str | None = None,
            kind: str = "branch", trace_index: int | None = None, taken: bool | None = None):
        if constraint.is_const:
            return None
        pc = PathConstraint(constraint, address, callsite, mnemonic, len(self), kind, trace_index, taken)
        self.append(pc)
        return pc

    def branches(self) -> list[PathConstraint]:
        return [c for c in self if c.kind == "branch"]


@dataclass(frozen=True)
class Frame:
    callsite: int | None
    entry: int
    slot: int


@dataclass
class CallStack:
    frames: list[Frame] = field(default_factory=list)

    def push(self, callsite, entry, slot):
        self.frames.append(Frame(callsite, entry, slot))

    def pop_to(self, sp: int):
        while len(self.frames) > 1 and self.frames[-1].slot < sp:
            self.frames.pop()

    @property
    def callsite(self) -> int | None:
        return self.frames[-1].callsite if self.frames else None

    def callsites(self) -> frozenset:
        return frozenset(f.callsite for f in self.frames)

    def snapshot(self) -> tuple:
        return tuple(self.frames)


class SymbolicState:
    """Symbolic registers and memory with the identity model of the current input."""

    def __init__(self, input_bytes: bytes):
        self.regs: dict[int, Expr] = {}
        self.mem: dict[int, Expr] = {}
        self.inputs: list[tuple[str, int]] = []
        self.identity: dict[str, int] = {}
        self.input_bytes = bytes(input_bytes)
        self._cache: dict = {}
        self.concretizations = 0

    def new_input(self, offset: int) -> Expr:
        v = input_var(offset)
        if v.name not in self.identity:
            self.inputs.append((v.name, offset))
            self.identity[v.name] = self.input_bytes[offset]
        return v

    def value(self, e: Expr) -> int:
        return evaluate(e, self.identity, self._cache)

    def consistent(self, e: Expr, concrete: int) -> bool:
        return self.value(e) == concrete & E.mask(e.width)

    def set_reg(self, n: int, e: Expr | None, concrete: int):
        """Install a 64-bit expression, dropping it when it disagrees with the VM."""
        if e is None or not e.symbolic:
            self.regs.pop(n, None)
            return
        if e.width != 64:
            e = E.zext(e, 64 - e.width)
        if not self.consistent(e, concrete):
            self.concretizations += 1
            self.regs.pop(n, None)
            return
        self.regs[n] = e

    def reg(self, n: int, width: int = 64) -> Expr | None:
        e = self.regs.get(n)
        if e is None:
            return None
        return e if width == 64 else E.extract(e, width - 1, 0)

    def set_byte(self, addr: int, e: Expr | None):
        if e is None or not e.symbolic:
            self.mem.pop(addr, None)
        else:
            self.mem[addr] = e

    def clear(self, start: int, length: int):
        if not self.mem:
            return
        if length > len(self.mem):
            for a in [a for a in self.mem if start <= a < start + length]:
                del self.mem[a]
        else:
            for a in range(start, start + length):
                self.mem.pop(a, None)
