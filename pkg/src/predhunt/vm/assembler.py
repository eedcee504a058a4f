"""Two-pass assembler for the MiniVM text format."""

from __future__ import annotations

import ast
import re

from .isa import (
    ARITH,
    COMPARE,
    GLOBALS_BASE,
    GUARD,
    INST_SIZE,
    INTRINSICS,
    JUMPS,
    MNEMONICS,
    NEEDS_WIDTH,
    TEXT_BASE,
    UNARY,
    WIDTHS,
    Global,
    Imm,
    Instruction,
    Mem,
    Program,
    Reg,
)


class AsmError(ValueError):
    pass


class ParseError(AsmError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class UnknownLabel(AsmError):
    def __init__(self, name: str, line: int = 0):
        super().__init__(f"line {line}: unknown label {name!r}")
        self.name = name
        self.line = line


class DuplicateLabel(AsmError):
    def __init__(self, name: str, line: int = 0):
        super().__init__(f"line {line}: duplicate label {name!r}")
        self.name = name
        self.line = line


_LABEL = re.compile(r"^([A-Za-z_.$][\w.$]*)\s*:")
_CHAR = re.compile(r"'(\\.|\\x[0-9a-fA-F]{2}|[^'\\])'")
_REG = re.compile(r"^(?:r(\d+)|sp)$")
_NAME = re.compile(r"^[A-Za-z_.$][\w.$]*$")


def _strip_comment(line: str) -> str:
    out, quote = [], None
    for ch in line:
        if quote:
            out.append(ch)
            if ch == quote and (len(out) < 2 or out[-2] != "\\"):
                quote = None
            continue
        if ch in "\"'":
            quote = ch
        elif ch == ";":
            break
        out.append(ch)
    return "".join(out).strip()


def _chars_to_ints(text: str) -> str:
    return _CHAR.sub(lambda m: str(ord(ast.literal_eval(m.group(0)))), text)


def _split_operands(text: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if cur and "".join(cur).strip():
        parts.append("".join(cur).strip())
    return parts


def _terms(text: str) -> list[tuple[int, str]]:
    """Split ``a + b*4 - 8`` into signed terms."""
    text = text.replace(" ", "")
    out, sign, cur = [], 1, ""
    for ch in text:
        if ch in "+-" and cur and not cur.endswith("*"):
            out.append((sign, cur))
            sign, cur = (1 if ch == "+" else -1), ""
        elif ch in "+-" and not cur:
            sign = sign * (1 if ch == "+" else -1)
        else:
            cur += ch
    if cur:
        out.append((sign, cur))
    return out


def _reg(tok: str) -> int | None:
    m = _REG.match(tok)
    if not m:
        return None
    n = 15 if m.group(1) is None else int(m.group(1))
    return n if 0 <= n < 16 else None


class _Assembler:
    def __init__(self, source: str):
        self.source = source
        self.data: list[tuple[str, bytearray, int]] = []
        self.text: list[tuple[int, str, str, int]] = []  # (index, mnemonic.w, operand text, line)
        self.text_labels: dict[str, int] = {}
        self.entry_name: str | None = None
        self.names: dict[str, int] = {}

    def parse(self):
        section = "text"
        for lineno, raw in enumerate(self.source.splitlines(), 1):
            line = _strip_comment(raw)
            while True:
                m = _LABEL.match(line)
                if not m or line.startswith("."):
                    break
                self._define(m.group(1), section, lineno)
                line = line[m.end():].strip()
            if not line:
                continue
            if line in (".data", ".text"):
                section = line[1:]
                continue
            if line.startswith(".entry"):
                self.entry_name = line.split()[1]
                continue
            if section == "data":
                self._directive(line, lineno)
            else:
                head, _, rest = line.partition(" ")
                self.text.append((len(self.text), head.strip(), rest.strip(), lineno))

    def _define(self, name: str, section: str, lineno: int):
        if name in self.text_labels or any(d[0] == name for d in self.data):
            raise DuplicateLabel(name, lineno)
        if section == "data":
            self.data.append((name, bytearray(), lineno))
        else:
            self.text_labels[name] = len(self.text)

    def _directive(self, line: str, lineno: int):
        if not self.data:
            raise ParseError(lineno, "data directive before any label")
        buf = self.data[-1][1]
        op, _, rest = line.partition(" ")
        rest = rest.strip()
        try:
            if op == ".ascii":
                buf.extend(ast.literal_eval("b" + rest))
            elif op == ".zero":
                buf.extend(bytes(int(rest, 0)))
            elif op in (".byte", ".word16", ".word32", ".word64"):
                size = {".byte": 1, ".word16": 2, ".word32": 4, ".word64": 8}[op]
                for item in _split_operands(_chars_to_ints(rest)):
                    buf.extend((int(item, 0) & ((1 << (8 * size)) - 1)).to_bytes(size, "little"))
            else:
                raise ParseError(lineno, f"unknown directive {op}")
        except (ValueError, SyntaxError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(lineno, f"bad operand for {op}: {rest!r}") from None

    def layout(self) -> dict[str, Global]:
        out = {}
        addr = GLOBALS_BASE
        for name, buf, _ in self.data:
            out[name] = Global(name, addr, len(buf), bytes(buf))
            end = addr + max(len(buf), 1)
            addr = -(-end // 16) * 16 + GUARD
        self.names = {n: g.address for n, g in out.items()}
        for name, idx in self.text_labels.items():
            self.names[name] = TEXT_BASE + idx * INST_SIZE
        return out

    def _const(self, text: str, lineno: int) -> int:
        total = 0
        for sign, term in _terms(_chars_to_ints(text)):
            if _NAME.match(term):
                if term not in self.names:
                    raise UnknownLabel(term, lineno)
                total += sign * self.names[term]
            else:
                try:
                    total += sign * int(term, 0)
                except ValueError:
                    raise ParseError(lineno, f"bad constant {term!r}") from None
        return total

    def _mem(self, text: str, lineno: int) -> Mem:
        base = index = None
        scale, disp = 1, 0
        for sign, term in _terms(_chars_to_ints(text)):
            if "*" in term:
                a, b = term.split("*", 1)
                r, s = (_reg(a), b) if _reg(a) is not None else (_reg(b), a)
                if r is None or sign < 0 or index is not None:
                    raise ParseError(lineno, f"bad scaled index {term!r}")
                scale = int(s, 0)
                if scale not in (1, 2, 4, 8):
                    raise ParseError(lineno, f"scale must be 1, 2, 4 or 8, got {scale}")
                index = r
            elif _reg(term) is not None:
                if sign < 0:
                    raise ParseError(lineno, "registers cannot be subtracted in an address")
                if base is None:
                    base = _reg(term)
                elif index is None:
                    index = _reg(term)
                else:
                    raise ParseError(lineno, "too many registers in memory operand")
            else:
                disp += sign * self._const(term, lineno)
        return Mem(base, index, scale, disp)

    def _operand(self, tok: str, lineno: int):
        if tok.startswith("["):
            if not tok.endswith("]"):
                raise ParseError(lineno, f"unterminated memory operand {tok!r}")
            return self._mem(tok[1:-1], lineno)
        r = _reg(tok)
        if r is not None:
            return Reg(r)
        if _REG.match(tok) or re.match(r"^r\d+$", tok):
            raise ParseError(lineno, f"no such register {tok}")
        return Imm(self._const(tok, lineno))

    def instruction(self, idx: int, head: str, rest: str, lineno: int) -> Instruction:
        mnemonic, _, suffix = head.partition(".")
        mnemonic = mnemonic.lower()
        if mnemonic not in MNEMONICS:
            raise ParseError(lineno, f"unknown mnemonic {mnemonic!r}")
        if suffix:
            if not suffix.isdigit() or int(suffix) not in WIDTHS:
                raise ParseError(lineno, f"bad width suffix .{suffix}")
            width = int(suffix)
        elif mnemonic in NEEDS_WIDTH:
            raise ParseError(lineno, f"{mnemonic} needs a width suffix")
        else:
            width = 64
        address = TEXT_BASE + idx * INST_SIZE
        text = f"{head} {rest}".strip()
        ops = _split_operands(rest)
        if mnemonic in JUMPS or mnemonic == "call":
            if len(ops) != 1:
                raise ParseError(lineno, f"{mnemonic} takes one label")
            if ops[0] not in self.text_labels:
                raise UnknownLabel(ops[0], lineno)
            return Instruction(address, mnemonic, width, (), self.names[ops[0]], None, lineno, text)
        if mnemonic == "icall":
            if len(ops) != 1 or ops[0] not in INTRINSICS:
                raise ParseError(lineno, f"unknown intrinsic {rest!r}")
            return Instruction(address, mnemonic, width, (), None, ops[0], lineno, text)
        operands = tuple(self._operand(o, lineno) for o in ops)
        kinds = tuple(type(o) for o in operands)
        ok = {
            "mov": lambda: kinds in ((Reg, Reg), (Reg, Imm)),
            "movsx": lambda: kinds == (Reg, Reg),
            "load": lambda: kinds == (Reg, Mem),
            "store": lambda: kinds in ((Mem, Reg), (Mem, Imm)),
            "lea": lambda: kinds == (Reg, Mem),
            "push": lambda: kinds in ((Reg,), (Imm,)),
            "pop": lambda: kinds == (Reg,),
            "ret": lambda: kinds == (),
            "halt": lambda: kinds == (),
        }
        if mnemonic in ARITH or mnemonic in COMPARE:
            valid = kinds in ((Reg, Reg), (Reg, Imm))
        elif mnemonic in UNARY:
            valid = kinds == (Reg,)
        else:
            valid = ok[mnemonic]()
        if not valid:
            raise ParseError(lineno, f"illegal operands for {mnemonic}: {rest!r}")
        if mnemonic == "sal":
            mnemonic = "shl"
        return Instruction(address, mnemonic, width, operands, None, None, lineno, text)


def assemble(source: str) -> Program:
    asm = _Assembler(source)
    asm.parse()
    globals_ = asm.layout()
    insts = [asm.instruction(*t) for t in asm.text]
    if not insts:
        raise ParseError(0, "program has no instructions")
    entry_name = asm.entry_name or ("main" if "main" in asm.text_labels else None)
    if entry_name is None:
        entry = insts[0].address
    elif entry_name not in asm.text_labels:
        raise UnknownLabel(entry_name)
    else:
        entry = asm.names[entry_name]
    labels = {n: asm.names[n] for n in asm.text_labels}
    return Program(insts, globals_, labels, entry, source)


def assemble_file(path) -> Program:
    with open(path) as fh:
        return assemble(fh.read())
