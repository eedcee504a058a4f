"""MiniVM: a small deterministic register machine with x86-like flags."""

from .assembler import AsmError, DuplicateLabel, ParseError, UnknownLabel, assemble, assemble_file
from .events import Branch, Halt, InputRead, InstExec, IntrinsicCall, RunResult, Trap
from .flags import branch_taken, flag_semantics, overflow_condition, shift_overflow
from .isa import Global, Imm, Instruction, Mem, Program, Reg
from .machine import BudgetExceeded, InvalidOpcode, Machine, VMError, Watchpoint, run

__all__ = [
    "AsmError", "DuplicateLabel", "ParseError", "UnknownLabel", "assemble", "assemble_file",
    "Branch", "Halt", "InputRead", "InstExec", "IntrinsicCall", "RunResult", "Trap",
    "branch_taken", "flag_semantics", "overflow_condition", "shift_overflow",
    "Global", "Imm", "Instruction", "Mem", "Program", "Reg",
    "BudgetExceeded", "InvalidOpcode", "Machine", "VMError", "Watchpoint", "run",
]
