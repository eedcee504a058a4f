"""Events emitted by the MiniVM, one per executed instruction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .isa import Instruction


@dataclass(slots=True)
class InstExec:
    inst: Instruction
    pre: tuple  # registers before
    pre_flags: tuple  # (CF, OF, ZF, SF) before
    addr: int | None = None  # effective memory address, if any
    value: int | None = None  # loaded or stored value
    result: int | None = None  # value written to the destination register
    flags: tuple = ()


@dataclass(slots=True)
class Branch:
    inst: Instruction
    address: int
    mnemonic: str
    taken: bool
    target: int


@dataclass(slots=True)
class IntrinsicCall:
    inst: Instruction
    name: str
    args: tuple
    ret: int | None
    touched: list = field(default_factory=list)  # (start, length) of written bytes
    info: dict = field(default_factory=dict)


@dataclass(slots=True)
class InputRead:
    inst: Instruction
    buf: int
    count: int
    data: bytes
    offsets: range
    quirk: bool = False


@dataclass(slots=True)
class Halt:
    code: int


@dataclass(slots=True)
class Trap:
    kind: str
    address: int
    data_address: int | None = None


@dataclass
class RunResult:
    outcome: str  # "exit" | "trap"
    code: int | None = None
    trap: Trap | None = None
    count: int = 0
    branches: list = field(default_factory=list)
    output: list = field(default_factory=list)

    @property
    def trapped(self) -> bool:
        return self.outcome == "trap"

    def to_json(self) -> dict:
        out = {"outcome": self.outcome, "count": self.count,
               "branches": [[hex(a), t] for a, t in self.branches]}
        if self.outcome == "exit":
            out["code"] = self.code
        else:
            out["trap"] = {"kind": self.trap.kind, "address": hex(self.trap.address),
                           "data_address": None if self.trap.data_address is None
                           else hex(self.trap.data_address)}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


class _Fault(Exception):
    def __init__(self, kind: str, data_address: int | None = None):
        self.kind = kind
        self.data_address = data_address
