"""MiniVM instruction set, program image and fixed memory map."""

from __future__ import annotations

from dataclasses import dataclass, field

NULL_PAGE_END = 0x1000
GLOBALS_BASE = 0x1000
STACK_BASE = 0xF00000
STACK_TOP = 0x1000000
HEAP_BASE = 0x40000000
HEAP_ALIGN = 16
GUARD = 16
MAX_ALLOC = 1 << 31  # larger requests fail like an exhausted heap
TEXT_BASE = 0x400000
INST_SIZE = 4
EXIT_RETURN = TEXT_BASE - INST_SIZE  # return address planted for the entry function
SP = 15
NUM_REGS = 16
WIDTHS = (8, 16, 32, 64)

INTRINSICS = (
    "read", "read_num_scanf_quirk", "malloc", "calloc", "realloc", "free",
    "memcpy", "memmove", "memset", "strcpy", "strncpy", "strlen", "strchr",
    "memchr", "strcmp", "strncmp", "memcmp", "strstr", "strtol", "strtoul",
    "strtoll", "strtoull", "atoi", "print",
)

ARITH = {"add", "adc", "sub", "sbb", "mul", "imul", "div", "shl", "sal", "shr", "sar", "and", "or", "xor"}
UNARY = {"not", "neg"}
COMPARE = {"cmp", "test"}
JUMPS = {"jmp", "jz", "jnz", "js", "jns", "jg", "jge", "jl", "jle", "ja", "jae", "jb", "jbe"}
MNEMONICS = ARITH | UNARY | COMPARE | JUMPS | {
    "mov", "movsx", "load", "store", "lea", "push", "pop", "call", "ret", "icall", "halt",
}
NEEDS_WIDTH = ARITH | UNARY | COMPARE | {"mov", "movsx", "load", "store"}


@dataclass(frozen=True)
class Reg:
    n: int

    def __str__(self):
        return f"r{self.n}"


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self):
        return hex(self.value) if self.value > 9 else str(self.value)


@dataclass(frozen=True)
class Mem:
    base: int | None = None
    index: int | None = None
    scale: int = 1
    disp: int = 0

    def __str__(self):
        parts = []
        if self.base is not None:
            parts.append(f"r{self.base}")
        if self.index is not None:
            parts.append(f"r{self.index}*{self.scale}" if self.scale != 1 else f"r{self.index}")
        if self.disp or not parts:
            parts.append(hex(self.disp))
        return "[" + " + ".join(parts) + "]"


@dataclass(frozen=True)
class Instruction:
    address: int
    mnemonic: str
    width: int
    operands: tuple = ()
    target: int | None = None
    intrinsic: str | None = None
    line: int = 0
    text: str = ""

    @property
    def next_address(self) -> int:
        return self.address + INST_SIZE

    def __str__(self):
        return self.text or self.mnemonic


@dataclass(frozen=True)
class Global:
    name: str
    address: int
    size: int
    data: bytes

    @property
    def end(self) -> int:
        return self.address + self.size


@dataclass
class Program:
    instructions: list[Instruction]
    globals: dict[str, Global]
    labels: dict[str, int]
    entry: int
    source: str = ""
    by_address: dict[int, Instruction] = field(default_factory=dict)

    def __post_init__(self):
        if not self.by_address:
            self.by_address = {i.address: i for i in self.instructions}

    @property
    def symbols(self) -> dict[str, tuple[int, int]]:
        return {g.name: (g.address, g.end) for g in self.globals.values()}

    def at(self, address: int) -> Instruction | None:
        return self.by_address.get(address)

    def label_of(self, address: int) -> str | None:
        for name, addr in self.labels.items():
            if addr == address:
                return name
        return None
