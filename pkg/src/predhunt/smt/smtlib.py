"""SMT-LIB v2.6 (QF_BV) script emission and model parsing."""

from __future__ import annotations

import re
from collections import Counter
from typing import Sequence

from .analysis import variables
from .expr import K, Expr, postorder

_SIMPLE_SYMBOL = re.compile(r"^[A-Za-z~!@$%^&*_+=<>.?/\-][0-9A-Za-z~!@$%^&*_+=<>.?/\-]*$")

_MODEL_ENTRY = re.compile(
    r"\(define-fun\s+(\|[^|]*\||[^\s()]+)\s+\(\)\s+\(_\s+BitVec\s+(\d+)\)\s+"
    r"(#x[0-9a-fA-F]+|#b[01]+|\(_\s+bv\d+\s+\d+\))\s*\)"
)


class SmtParseError(ValueError):
    pass


def symbol(name: str) -> str:
    return name if _SIMPLE_SYMBOL.match(name) else f"|{name}|"


def literal(value: int, width: int) -> str:
    if width % 4 == 0:
        return f"#x{value:0{width // 4}x}"
    return f"#b{value:0{width}b}"


def _apply(op: str, parts: Sequence[str]) -> str:
    return f"({op} {' '.join(parts)})"


def _binary_chain(op: str, parts: Sequence[str]) -> str:
    out = parts[0]
    for p in parts[1:]:
        out = f"({op} {out} {p})"
    return out


def _render_node(node: Expr, parts: list[str]) -> str:
    kind = node.kind
    if kind is K.Extract:
        return f"((_ extract {node.params[0]} {node.params[1]}) {parts[0]})"
    if kind is K.ZeroExtend:
        return f"((_ zero_extend {node.params[0]}) {parts[0]})"
    if kind is K.SignExtend:
        return f"((_ sign_extend {node.params[0]}) {parts[0]})"
    if kind in (K.Add, K.Mul, K.And, K.Or, K.Xor, K.Concat):
        return _binary_chain(kind.value, parts)
    return _apply(kind.value, parts)


def render(expr: Expr, prefix: str = "?t") -> str:
    """Render one term, let-binding every compound node referenced twice or more."""
    refs: Counter = Counter()
    order = list(postorder(expr))
    for node in order:
        for a in node.args:
            refs[a] += 1
    text: dict[Expr, str] = {}
    level: dict[Expr, int] = {}
    bindings: dict[int, list[tuple[str, str]]] = {}
    for node in order:
        kind = node.kind
        if kind is K.BvConst:
            text[node] = literal(node.params[0], node.width)
            level[node] = 0
            continue
        if kind is K.BoolConst:
            text[node] = "true" if node.params[0] else "false"
            level[node] = 0
            continue
        if kind is K.BvVar:
            text[node] = symbol(node.params[0])
            level[node] = 0
            continue
        body = _render_node(node, [text[a] for a in node.args])
        lvl = max(level[a] for a in node.args)
        if refs[node] > 1 and node is not expr:
            name = f"{prefix}{len(text)}"
            lvl += 1
            bindings.setdefault(lvl, []).append((name, body))
            text[node] = name
        else:
            text[node] = body
        level[node] = lvl
    out = text[expr]
    for lvl in sorted(bindings, reverse=True):
        binds = " ".join(f"({n} {b})" for n, b in bindings[lvl])
        out = f"(let ({binds}) {out})"
    return out


def emit_smtlib(assertions: Sequence[Expr], get_model: bool = True) -> str:
    """A complete, deterministic QF_BV script for ``assertions``."""
    decls: dict[str, int] = {}
    for a in assertions:
        if not a.is_bool:
            raise TypeError("assertions must be boolean-sorted")
        decls.update(variables(a))
    lines = ["(set-option :produce-models true)", "(set-logic QF_BV)"]
    for name in sorted(decls):
        lines.append(f"(declare-fun {symbol(name)} () (_ BitVec {decls[name]}))")
    for i, a in enumerate(assertions):
        lines.append(f"(assert {render(a, prefix=f'?a{i}_')})")
    lines.append("(check-sat)")
    if get_model:
        lines.append("(get-model)")
    lines.append("(exit)")
    return "\n".join(lines) + "\n"


def parse_model(text: str) -> dict[str, int]:
    model = {}
    for m in _MODEL_ENTRY.finditer(text):
        name, width, lit = m.group(1), int(m.group(2)), m.group(3)
        name = name[1:-1] if name.startswith("|") else name
        if lit.startswith("#x"):
            value = int(lit[2:], 16)
        elif lit.startswith("#b"):
            value = int(lit[2:], 2)
        else:
            value = int(lit.split()[1][2:])
        model[name] = value & ((1 << width) - 1)
    return model


def parse_response(text: str) -> tuple[str, dict[str, int]]:
    """Split a solver response into (status, model)."""
    stripped = text.strip()
    if not stripped:
        raise SmtParseError("empty solver response")
    first, _, rest = stripped.partition("\n")
    status = first.strip()
    if status not in ("sat", "unsat", "unknown"):
        raise SmtParseError(f"unexpected solver output: {first[:200]!r}")
    if status == "sat":
        if "(error" in rest:
            raise SmtParseError(f"solver error: {rest[:200]!r}")
        return status, parse_model(rest)
    return status, {}
