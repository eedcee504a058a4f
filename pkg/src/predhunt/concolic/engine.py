"""Concolic interpretation of the MiniVM event stream."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..secpred.checker import Checker
from ..secpred.predicates import branch_condition, flag_exprs, result_expr
from ..semantics import effects, unmodeled
from ..semantics.models import MODELED, BufferView, ModelSkipped, model_call, return_width, sign_class
from ..smt import expr as E
from ..smt.expr import Expr
from ..smt.solver import DEFAULT_TIMEOUT_MS, Solver, make_backend
from ..vm.events import Branch, Halt, InputRead, InstExec, IntrinsicCall, Trap
from ..vm.isa import STACK_TOP, Imm, Mem, Program, Reg
from ..vm.machine import DEFAULT_BUDGET, Machine
from .state import CallStack, Frame, PathPredicate, SymbolicState

log = logging.getLogger(__name__)

PREDICATES = ("null", "div", "oob", "overflow", "copy")
ARITH = {"add", "adc", "sub", "sbb", "mul", "imul", "and", "or", "xor", "shl", "shr", "sar"}
SHIFTS = {"shl", "shr", "sar"}


@dataclass
class Config:
    predicates: frozenset = frozenset(PREDICATES)
    models: bool = True
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    solver: str | None = None
    emit_smt: bool = False
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        self.predicates = frozenset(self.predicates)
        unknown = self.predicates - set(PREDICATES)
        if unknown:
            raise ValueError(f"unknown predicates: {', '.join(sorted(unknown))}")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class SymbolicTrace:
    """Notable engine events: concretizations, skipped models and queries."""

    records: list = field(default_factory=list)
    instructions: int = 0
    outcome: object = None

    def note(self, what: str, address: int | None = None, **extra):
        self.records.append({"event": what, "address": address, **extra})

    def count(self, what: str) -> int:
        return sum(1 for r in self.records if r["event"] == what)


class Session:
    """One concolic run over one input; owns its solver and predicate state."""

    def __init__(self, program: Program, input_bytes: bytes, config: Config | None = None,
                 solver: Solver | None = None):
        self.program = program
        self.input = bytes(input_bytes)
        self.config = config or Config()
        self.vm = Machine(program, self.input, "plain", budget=self.config.budget)
        self.state = SymbolicState(self.input)
        self.path = PathPredicate()
        self.calls = CallStack([Frame(None, program.entry, STACK_TOP - 8)])
        self.solver = solver or Solver(make_backend(self.config.solver), self.config.timeout_ms)
        self.trace = SymbolicTrace()
        self.flag_src: tuple | None = None
        self.provenance: dict[str, str] = {}
        self.branch_index = 0
        self.prev_inst = None
        self.checker = Checker(self)

    # helpers --------------------------------------------------------------

    def view(self) -> BufferView:
        mem = self.vm.mem
        return BufferView(self.state.mem, lambda a: mem.get(a, 0))

    def operand(self, op, width: int, pre: tuple) -> Expr:
        """Operand as an expression: symbolic when tracked, constant otherwise."""
        if isinstance(op, Reg):
            e = self.state.reg(op.n, width)
            return e if e is not None else E.bv(pre[op.n], width)
        return E.bv(op.value, width)

    def address(self, m: Mem, pre: tuple) -> Expr | None:
        base = self.state.reg(m.base) if m.base is not None else None
        index = self.state.reg(m.index) if m.index is not None else None
        if base is None and index is None:
            return None
        terms = []
        if m.base is not None:
            terms.append(base if base is not None else E.bv(pre[m.base], 64))
        if m.index is not None:
            idx = index if index is not None else E.bv(pre[m.index], 64)
            terms.append(E.mul(idx, E.bv(m.scale, 64)) if m.scale != 1 else idx)
        if m.disp:
            terms.append(E.bv(m.disp, 64))
        return E.add(*terms) if len(terms) > 1 else terms[0]

    def load_expr(self, addr: int, size: int) -> Expr | None:
        st = self.state
        parts = [st.mem.get(addr + k) for k in range(size)]
        if all(p is None for p in parts):
            return None
        mem = self.vm.mem
        parts = [p if p is not None else E.bv(mem.get(addr + k, 0), 8) for k, p in enumerate(parts)]
        return E.concat(*reversed(parts)) if size > 1 else parts[0]

    def store_expr(self, addr: int, value: Expr | None, size: int):
        for k in range(size):
            self.state.set_byte(addr + k, E.extract(value, 8 * k + 7, 8 * k) if value is not None else None)

    def cf_expr(self, concrete: int) -> Expr:
        if self.flag_src is None:
            return E.bv(concrete, 1)
        cf = flag_exprs(*self.flag_src)[0]
        return E.ite(cf, E.bv(1, 1), E.bv(0, 1))

    def constrain(self, cond: Expr, address: int, kind: str, mnemonic: str | None = None,
                  trace_index: int | None = None, taken: bool | None = None):
        if cond.is_const:
            return None
        if self.state.value(cond) != 1:
            self.trace.note("inconsistent-constraint", address, kind=kind)
            return None
        return self.path.add(cond, address, self.calls.callsite, mnemonic, kind, trace_index, taken)

    def pin(self, e: Expr | None, concrete: int, address: int):
        """Fix a symbolic value to its concrete one (scan bounds, shift counts)."""
        if e is not None and e.symbolic:
            self.constrain(E.eq(e, E.bv(concrete, e.width)), address, "pin")

    # main loop ------------------------------------------------------------

    def run(self):
        vm = self.vm
        while not vm.halted:
            ev = vm.step()
            if isinstance(ev, InstExec):
                self.on_inst(ev)
                self.prev_inst = ev.inst
            elif isinstance(ev, Branch):
                self.on_branch(ev)
            elif isinstance(ev, IntrinsicCall):
                self.on_intrinsic(ev)
            elif isinstance(ev, InputRead):
                self.on_input(ev)
            elif isinstance(ev, (Halt, Trap)):
                break
        self.trace.instructions = vm.count
        self.trace.outcome = vm.result()
        return self.path, self.trace, self.checker.reports

    def on_input(self, ev: InputRead):
        quirk_pending = ev.quirk
        for k, off in enumerate(ev.offsets):
            if quirk_pending and ev.data[k] == ord("0"):
                quirk_pending = False  # the first zero digit stays concrete
                self.state.set_byte(ev.buf + k, None)
                continue
            self.state.set_byte(ev.buf + k, self.state.new_input(off))
        self.state.regs.pop(0, None)

    def on_branch(self, ev: Branch):
        idx = self.branch_index
        self.branch_index += 1
        if self.flag_src is None:
            return
        cond = branch_condition(ev.mnemonic, *self.flag_src)
        if cond.is_const:
            return
        self.checker.on_branch_sink(ev.inst, self.flag_src)
        oriented = cond if ev.taken else E.lnot(cond)
        self.constrain(oriented, ev.address, "branch", ev.mnemonic, idx, ev.taken)

    def on_inst(self, ev: InstExec):
        inst = ev.inst
        mn = inst.mnemonic
        st = self.state
        if mn in ("call", "ret"):
            self._on_call_ret(ev)
            return
        if not st.regs and not st.mem and self.flag_src is None:
            if mn in ARITH or mn in ("cmp", "test", "neg"):
                return
            if mn not in ("store", "push"):
                return
        w = inst.width
        ops = inst.operands
        pre = ev.pre
        if mn == "mov":
            src = self.operand(ops[1], w, pre)
            st.set_reg(ops[0].n, src if src.symbolic else None, ev.result)
        elif mn == "movsx":
            src = self.operand(ops[1], w, pre)
            st.set_reg(ops[0].n, E.sext(src, 64 - w) if src.symbolic else None, ev.result)
        elif mn == "load":
            addr_e = self.address(ops[1], pre)
            if addr_e is not None:
                self.checker.on_memory(inst, addr_e, ev.addr, "read", False, w // 8)
            st.set_reg(ops[0].n, self.load_expr(ev.addr, w // 8), ev.result)
        elif mn == "store":
            addr_e = self.address(ops[0], pre)
            value = self.operand(ops[1], w, pre)
            if addr_e is not None:
                self.checker.on_memory(inst, addr_e, ev.addr, "write", value.symbolic, w // 8)
            self.store_expr(ev.addr, value if value.symbolic else None, w // 8)
        elif mn == "lea":
            st.set_reg(ops[0].n, self.address(ops[1], pre), ev.result)
        elif mn == "push":
            value = self.operand(ops[0], 64, pre)
            self.store_expr(ev.addr, value if value.symbolic else None, 8)
        elif mn == "pop":
            st.set_reg(ops[0].n, self.load_expr(ev.addr, 8), ev.result)
        elif mn in ("cmp", "test"):
            a = self.operand(ops[0], w, pre)
            b = self.operand(ops[1], w, pre)
            if a.symbolic or b.symbolic:
                self.flag_src = (mn, a, b, None, result_expr(mn, a, b))
            else:
                self.flag_src = None
        elif mn in ARITH:
            self._arith(ev)
        elif mn == "neg":
            a = self.operand(ops[0], w, pre)
            if not a.symbolic:
                self.flag_src = None
                st.set_reg(ops[0].n, None, ev.result)
                return
            r = E.neg(a)
            self.checker.on_arith(inst, "neg", a, None, None, r)
            self.flag_src = ("neg", a, None, None, r)
            st.set_reg(ops[0].n, r, ev.result)
        elif mn == "not":
            a = self.operand(ops[0], w, pre)
            st.set_reg(ops[0].n, E.bnot(a) if a.symbolic else None, ev.result)
        elif mn == "div":
            a = self.operand(ops[0], w, pre)
            b = self.operand(ops[1], w, pre)
            if b.symbolic:
                self.checker.on_div(inst, b)
            st.set_reg(ops[0].n, E.udiv(a, b) if (a.symbolic or b.symbolic) else None, ev.result)

    def _arith(self, ev: InstExec):
        inst = ev.inst
        mn, w, ops, pre = inst.mnemonic, inst.width, inst.operands, ev.pre
        a = self.operand(ops[0], w, pre)
        b = self.operand(ops[1], w, pre)
        cin = self.cf_expr(ev.pre_flags[0]) if mn in ("adc", "sbb") else None
        if mn in SHIFTS or mn == "sal":
            if b.symbolic:
                self.pin(b, pre[ops[1].n] & E.mask(w), inst.address)
                b = E.bv(pre[ops[1].n], w)
            keep_flags = (b.value & (63 if w == 64 else 31)) == 0
        else:
            keep_flags = False
        symbolic = a.symbolic or b.symbolic or (cin is not None and cin.symbolic)
        if not symbolic:
            if not keep_flags:
                self.flag_src = None
            self.state.set_reg(ops[0].n, None, ev.result)
            return
        r = result_expr(mn, a, b, cin)
        self.checker.on_arith(inst, mn, a, b, cin, r)
        if not keep_flags:
            self.flag_src = (mn, a, b, cin, r)
        self.state.set_reg(ops[0].n, r, ev.result)

    def _on_call_ret(self, ev: InstExec):
        if ev.inst.mnemonic == "call":
            self.state.clear(ev.addr, 8)
            self.calls.push(ev.inst.address, ev.inst.target, ev.addr)
            self.checker.on_call(ev.addr)
        else:
            sp = self.vm.sp
            self.calls.pop_to(sp)
            self.checker.on_ret(sp)

    # intrinsics -----------------------------------------------------------

    def on_intrinsic(self, ev: IntrinsicCall):
        name = ev.name
        st = self.state
        arg_exprs = [st.reg(i) for i in range(6)]
        self.checker.on_call_args(ev.inst, name, arg_exprs, ev.args)
        handled = effects.apply(self, ev, arg_exprs)
        if not handled:
            for start, length in ev.touched:
                st.clear(start, length)
        self.checker.update_shadow(ev)
        installed = None
        if name in MODELED:
            installed = self._model(ev, arg_exprs)
        st.set_reg(0, installed, ev.ret if ev.ret is not None else self.vm.regs[0])

    def _model(self, ev: IntrinsicCall, arg_exprs) -> Expr | None:
        name, args, inst = ev.name, ev.args, ev.inst
        if name in ("memchr", "memcmp", "strncmp"):
            self.pin(arg_exprs[2], args[2], inst.address)
        view = self.view()
        if not self.config.models:
            for cond in unmodeled.trace_conditions(name, args, view, self.state.value):
                self.constrain(cond, inst.address, "branch", "jnz")
            return None
        ch = None
        if name in ("memchr", "strchr") and arg_exprs[1] is not None:
            ch = E.extract(arg_exprs[1], 7, 0)
        try:
            res = model_call(name, args, view, ch)
        except ModelSkipped as exc:
            self.trace.note("model-skipped", inst.address, name=name, reason=str(exc))
            return None
        width = return_width(name)
        ret = ev.ret & E.mask(width)
        holds = all(self.state.value(c) for c, _ in res.constraints)
        if not holds or self.state.value(res.value if res.tie == "equal" else res.install) != ret:
            # e.g. a clamped out-of-range conversion: the formula does not describe this input
            self.trace.note("model-inconsistent", inst.address, name=name)
            return None
        for cond, kind in res.constraints:
            self.constrain(cond, inst.address, kind)
        if res.tie == "sign":
            self.constrain(sign_class(res.value, ret), inst.address, "tie")
        else:
            self.constrain(E.eq(res.value, E.bv(ret, width)), inst.address, "tie")
        if res.provenance:
            for v in res.value.vars:
                self.provenance.setdefault(v, res.provenance)
        self.trace.note("model", inst.address, name=name)
        value = res.install
        return E.zext(value, 64 - width) if width < 64 else value


def execute_concolic(program: Program, input_bytes: bytes, config: Config | None = None,
                     solver: Solver | None = None):
    """Run one concolic session; returns (path predicate, trace, error reports)."""
    return Session(program, input_bytes, config, solver).run()
