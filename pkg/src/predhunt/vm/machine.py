"""The MiniVM interpreter: concrete state, event stream and checked mode."""

from __future__ import annotations

import bisect
from dataclasses import dataclass

from . import intrinsics
from .events import Branch, Halt, InputRead, InstExec, IntrinsicCall, RunResult, Trap, _Fault
from .flags import CONDITIONAL_JUMPS, branch_taken, flag_semantics, overflow_condition, shift_count
from .isa import (
    EXIT_RETURN,
    GUARD,
    HEAP_ALIGN,
    HEAP_BASE,
    MAX_ALLOC,
    NULL_PAGE_END,
    NUM_REGS,
    SP,
    STACK_BASE,
    STACK_TOP,
    Imm,
    Instruction,
    Mem,
    Program,
    Reg,
)

MASK64 = (1 << 64) - 1
DEFAULT_BUDGET = 10_000_000
WATCH_FLAGS = ("CF", "OF", "ShiftU", "ShiftS", "LastSbbOF")
TRAP_KINDS = ("NullDeref", "OutOfBounds", "DivByZero", "OverflowWatch", "StackSmash")


class VMError(RuntimeError):
    pass


class BudgetExceeded(VMError):
    pass


class InvalidOpcode(VMError):
    pass


@dataclass(frozen=True)
class Watchpoint:
    address: int
    flag: str
    width: int | None = None  # evaluate the condition on the low bits only

    def __post_init__(self):
        if self.flag not in WATCH_FLAGS:
            raise ValueError(f"unknown watch flag {self.flag!r}")

    @classmethod
    def parse(cls, text: str) -> "Watchpoint":
        """``0x400010:OF`` or ``0x400010:CF:8``."""
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"bad watchpoint {text!r}")
        width = int(parts[2]) if len(parts) == 3 else None
        return cls(int(parts[0], 0), parts[1], width)


class Machine:
    def __init__(self, program: Program, input_bytes: bytes = b"", mode: str = "plain",
                 watchpoints=(), budget: int = DEFAULT_BUDGET):
        if mode not in ("plain", "checked"):
            raise ValueError(f"unknown mode {mode!r}")
        self.program = program
        self.input = bytes(input_bytes)
        self.cursor = 0
        self.checked = mode == "checked"
        self.watch: dict[int, list[Watchpoint]] = {}
        for w in watchpoints:
            self.watch.setdefault(w.address, []).append(w)
        self.budget = budget
        self.regs = [0] * NUM_REGS
        self.cf = self.of = self.zf = self.sf = 0
        self.mem: dict[int, int] = {}
        self.pc = program.entry
        self.halted = False
        self.exit_code: int | None = None
        self.trap: Trap | None = None
        self.count = 0
        self.branches: list[tuple[int, bool]] = []
        self.output: list = []
        self.heap_next = HEAP_BASE
        self.blocks: dict[int, int] = {}  # live heap blocks
        self._bases: list[int] = []
        self.ret_slots: list[int] = []  # live return-address slots, outermost first
        self._globals = sorted((g.address, g.end) for g in program.globals.values())
        self._gstarts = [g[0] for g in self._globals]
        for g in program.globals.values():
            for i, byte in enumerate(g.data):
                if byte:
                    self.mem[g.address + i] = byte
        sp = STACK_TOP - 8
        self.write_int(sp, EXIT_RETURN, 8, check=False)
        self.ret_slots.append(sp)
        self.regs[SP] = sp

    # memory ---------------------------------------------------------------

    @property
    def sp(self) -> int:
        return self.regs[SP]

    def region_ok(self, addr: int, write: bool) -> str | None:
        """Trap kind for touching ``addr`` in the current mode, or None."""
        if addr < NULL_PAGE_END:
            return "NullDeref"
        if not self.checked:
            return None
        i = bisect.bisect_right(self._gstarts, addr) - 1
        if i >= 0 and addr < self._globals[i][1]:
            return None
        j = bisect.bisect_right(self._bases, addr) - 1
        if j >= 0 and addr < self._bases[j] + self.blocks[self._bases[j]]:
            return None
        if STACK_BASE <= addr < STACK_TOP and addr >= self.regs[SP]:
            for slot in self.ret_slots:
                if slot <= addr < slot + 8:
                    return "StackSmash" if write else "OutOfBounds"
            return None
        return "OutOfBounds"

    def check(self, addr: int, size: int, write: bool):
        for k in range(size):
            kind = self.region_ok((addr + k) & MASK64, write)
            if kind:
                raise _Fault(kind, (addr + k) & MASK64)

    def read_byte(self, addr: int, check: bool = True) -> int:
        addr &= MASK64
        if check:
            self.check(addr, 1, False)
        return self.mem.get(addr, 0)

    def write_byte(self, addr: int, value: int, check: bool = True):
        addr &= MASK64
        if check:
            self.check(addr, 1, True)
        self.mem[addr] = value & 0xFF

    def read_int(self, addr: int, size: int, check: bool = True) -> int:
        if check:
            self.check(addr, size, False)
        return int.from_bytes(bytes(self.mem.get((addr + k) & MASK64, 0) for k in range(size)), "little")

    def write_int(self, addr: int, value: int, size: int, check: bool = True):
        if check:
            self.check(addr, size, True)
        for k, b in enumerate((value & ((1 << (8 * size)) - 1)).to_bytes(size, "little")):
            self.mem[(addr + k) & MASK64] = b

    def read_bytes(self, addr: int, n: int) -> bytes:
        return bytes(self.read_byte(addr + k) for k in range(n))

    def write_bytes(self, addr: int, data: bytes):
        for k, b in enumerate(data):
            self.write_byte(addr + k, b)

    def read_cstring(self, addr: int, limit: int | None = None) -> bytes:
        out = bytearray()
        while limit is None or len(out) < limit:
            b = self.read_byte(addr + len(out))
            if b == 0:
                break
            out.append(b)
        return bytes(out)

    # heap -----------------------------------------------------------------

    def allocate(self, size: int) -> int:
        if size > MAX_ALLOC:
            return 0
        base = self.heap_next
        self.heap_next = -(-(base + max(size, 1) + GUARD) // HEAP_ALIGN) * HEAP_ALIGN
        self.blocks[base] = size
        bisect.insort(self._bases, base)
        # memory is sparse and reads as zero: drop only bytes stored there before
        if size > len(self.mem):
            for a in [a for a in self.mem if base <= a < base + size]:
                del self.mem[a]
        else:
            for k in range(size):
                self.mem.pop(base + k, None)
        return base

    def release(self, base: int) -> bool:
        if base not in self.blocks:
            return False
        del self.blocks[base]
        self._bases.remove(base)
        return True

    def block_of(self, addr: int) -> tuple[int, int] | None:
        j = bisect.bisect_right(self._bases, addr) - 1
        if j >= 0 and addr < self._bases[j] + self.blocks[self._bases[j]]:
            return self._bases[j], self.blocks[self._bases[j]]
        return None

    # execution ------------------------------------------------------------

    def effective(self, m: Mem) -> int:
        addr = m.disp
        if m.base is not None:
            addr += self.regs[m.base]
        if m.index is not None:
            addr += self.regs[m.index] * m.scale
        return addr & MASK64

    def value_of(self, op, width: int) -> int:
        if isinstance(op, Reg):
            return self.regs[op.n] & ((1 << width) - 1)
        return op.value & ((1 << width) - 1)

    def set_reg(self, n: int, value: int, width: int = 64):
        self.regs[n] = value & ((1 << width) - 1)

    def flags(self) -> tuple:
        return (self.cf, self.of, self.zf, self.sf)

    def step(self):
        if self.halted:
            raise VMError("machine is halted")
        if self.count >= self.budget:
            raise BudgetExceeded(f"instruction budget {self.budget} exhausted")
        inst = self.program.by_address.get(self.pc)
        if inst is None:
            raise InvalidOpcode(f"no instruction at {self.pc:#x}")
        self.count += 1
        try:
            event = self._execute(inst)
        except _Fault as f:
            self.halted = True
            self.trap = Trap(f.kind, inst.address, f.data_address)
            return self.trap
        if self.checked and inst.address in self.watch and isinstance(event, InstExec):
            for w in self.watch[inst.address]:
                if self._watch_hit(w, event):
                    self.halted = True
                    self.trap = Trap("OverflowWatch", inst.address)
                    return self.trap
        return event

    def _watch_hit(self, w: Watchpoint, ev: InstExec) -> bool:
        inst = ev.inst
        if len(inst.operands) == 0 or not isinstance(inst.operands[0], Reg):
            return False
        width = w.width or inst.width
        a = ev.pre[inst.operands[0].n]
        b = 0
        if len(inst.operands) > 1:
            src = inst.operands[1]
            b = ev.pre[src.n] if isinstance(src, Reg) else src.value
        mn = inst.mnemonic
        if mn == "add" and len(inst.operands) > 1 and isinstance(inst.operands[1], Imm) \
                and (b >> (width - 1)) & 1:
            mn, b = "sub", -b
        if w.flag == "ShiftU":
            return mn == "shl" and overflow_condition("shl", width, a, b)[0] == 1
        if w.flag == "ShiftS":
            return mn == "shl" and overflow_condition("shl", width, a, b)[1] == 1
        unsigned, signed = overflow_condition(mn, width, a, b, ev.pre_flags[0])
        if w.flag == "CF":
            return unsigned == 1
        return signed == 1  # OF and LastSbbOF

    def _execute(self, inst: Instruction):
        mn = inst.mnemonic
        w = inst.width
        ops = inst.operands
        pre = tuple(self.regs)
        pre_flags = self.flags()
        nxt = inst.next_address
        if mn in CONDITIONAL_JUMPS:
            taken = branch_taken(mn, *pre_flags)
            self.branches.append((inst.address, taken))
            self.pc = inst.target if taken else nxt
            return Branch(inst, inst.address, mn, taken, inst.target)
        ev = InstExec(inst, pre, pre_flags)
        if mn == "mov":
            ev.result = self.value_of(ops[1], w)
            self.set_reg(ops[0].n, ev.result)
        elif mn == "movsx":
            v = self.value_of(ops[1], w)
            ev.result = (v - (1 << w) if v >> (w - 1) else v) & MASK64
            self.set_reg(ops[0].n, ev.result)
        elif mn == "load":
            ev.addr = self.effective(ops[1])
            ev.value = ev.result = self.read_int(ev.addr, w // 8)
            self.set_reg(ops[0].n, ev.result)
        elif mn == "store":
            ev.addr = self.effective(ops[0])
            ev.value = self.value_of(ops[1], w)
            self.write_int(ev.addr, ev.value, w // 8)
        elif mn == "lea":
            ev.result = self.effective(ops[1])
            self.set_reg(ops[0].n, ev.result)
        elif mn == "push":
            ev.addr = (self.sp - 8) & MASK64
            ev.value = self.value_of(ops[0], 64)
            self.write_int(ev.addr, ev.value, 8)
            self.regs[SP] = ev.addr
        elif mn == "pop":
            ev.addr = self.sp
            ev.value = ev.result = self.read_int(ev.addr, 8)
            self.regs[SP] = (self.sp + 8) & MASK64
            self.set_reg(ops[0].n, ev.result)
        elif mn == "call":
            ev.addr = (self.sp - 8) & MASK64
            ev.value = nxt
            self.write_int(ev.addr, nxt, 8, check=False)
            if ev.addr < NULL_PAGE_END:
                raise _Fault("NullDeref", ev.addr)
            self.regs[SP] = ev.addr
            self.ret_slots.append(ev.addr)
            self.pc = inst.target
            ev.flags = self.flags()
            return ev
        elif mn == "ret":
            ev.addr = self.sp
            ev.value = self.read_int(ev.addr, 8, check=False)
            self.regs[SP] = (self.sp + 8) & MASK64
            while self.ret_slots and self.ret_slots[-1] < self.regs[SP]:
                self.ret_slots.pop()
            ev.flags = self.flags()
            if ev.value == EXIT_RETURN:
                self.halted = True
                self.exit_code = self.regs[0] & 0xFF
                return Halt(self.exit_code)
            self.pc = ev.value
            return ev
        elif mn == "jmp":
            self.pc = inst.target
            ev.flags = self.flags()
            return ev
        elif mn == "halt":
            self.halted = True
            self.exit_code = self.regs[0] & 0xFF
            return Halt(self.exit_code)
        elif mn == "icall":
            self.pc = nxt
            return intrinsics.dispatch(self, inst)
        elif mn in ("cmp", "test"):
            a = self.value_of(ops[0], w)
            b = self.value_of(ops[1], w)
            _, self.cf, self.of, self.zf, self.sf = flag_semantics(mn, w, a, b)
        elif mn == "div":
            a = self.value_of(ops[0], w)
            b = self.value_of(ops[1], w)
            if b == 0:
                raise _Fault("DivByZero")
            ev.result = a // b
            self.set_reg(ops[0].n, ev.result)
        elif mn == "not":
            ev.result = ~self.value_of(ops[0], w) & ((1 << w) - 1)
            self.set_reg(ops[0].n, ev.result)
        elif mn == "neg":
            r, self.cf, self.of, self.zf, self.sf = flag_semantics("neg", w, self.value_of(ops[0], w))
            ev.result = r
            self.set_reg(ops[0].n, r)
        else:
            a = self.value_of(ops[0], w)
            b = self.value_of(ops[1], w)
            r, cf, of, zf, sf = flag_semantics(mn, w, a, b, self.cf)
            if mn in ("shl", "shr", "sar") and shift_count(b, w) == 0:
                pass  # x86 leaves flags alone for a zero count
            else:
                self.cf, self.of, self.zf, self.sf = cf, of, zf, sf
            ev.result = r
            self.set_reg(ops[0].n, r)
        self.pc = nxt
        ev.flags = self.flags()
        return ev

    def events(self):
        """Yield events until the machine halts or traps."""
        while not self.halted:
            yield self.step()

    def result(self) -> RunResult:
        if self.trap is not None:
            return RunResult("trap", None, self.trap, self.count, list(self.branches), self.output)
        return RunResult("exit", self.exit_code, None, self.count, list(self.branches), self.output)


def run(program: Program, input_bytes: bytes = b"", mode: str = "plain", watchpoints=(),
        budget: int = DEFAULT_BUDGET) -> RunResult:
    vm = Machine(program, input_bytes, mode, watchpoints, budget)
    for _ in vm.events():
        pass
    return vm.result()
