"""Evaluation and structural queries over expression DAGs."""

from __future__ import annotations

from typing import Mapping, Sequence

from .expr import K, Expr, UnboundVariable, apply_op, mask, postorder

Model = Mapping[str, int]


def evaluate(expr: Expr, model: Model, cache: dict | None = None) -> int:
    """Concrete value of ``expr`` under ``model``; booleans give 0/1.

    ``cache`` (node -> value) may be shared between calls that use the same
    model, which makes repeated evaluation of growing formulas incremental.
    """
    if cache is None:
        cache = {}
    hit = cache.get(expr)
    if hit is not None:
        return hit
    for node in postorder(expr):
        if node in cache:
            continue
        kind = node.kind
        if kind is K.BvConst or kind is K.BoolConst:
            val = node.params[0]
        elif kind is K.BvVar:
            try:
                val = model[node.params[0]] & mask(node.width)
            except KeyError:
                raise UnboundVariable(node.params[0]) from None
        else:
            args = node.args
            val = apply_op(kind, node.params, [a.width for a in args], [cache[a] for a in args], node.width)
        cache[node] = val
    return cache[expr]


def used_variables(expr: Expr) -> frozenset[str]:
    return expr.vars


def variables(expr: Expr) -> dict[str, int]:
    """name -> width for every variable in ``expr``."""
    return {n.params[0]: n.width for n in postorder(expr) if n.kind is K.BvVar}


def node_set(expr: Expr) -> set[Expr]:
    return set(postorder(expr))


def contains_subtree(haystack: Expr, needle: Expr) -> bool:
    if haystack is needle:
        return True
    if needle.kind is K.BvVar and needle.params[0] not in haystack.vars:
        return False
    if not needle.vars <= haystack.vars:
        return False
    return any(n is needle for n in postorder(haystack))


def find_extract_nodes(sink: Expr, source: Expr) -> list[tuple[Expr, int, int]]:
    """Extract nodes of ``sink`` whose operand subtree contains ``source``.

    Returns ``(node, lo, hi)`` triples, each node once, in DAG post-order.
    """
    containing: dict[Expr, bool] = {}
    hits = []
    for node in postorder(sink):
        inside = node is source or any(containing[a] for a in node.args)
        containing[node] = inside
        if node.kind is K.Extract and containing[node.args[0]]:
            hi, lo = node.params
            hits.append((node, lo, hi))
    return hits


def size(expr: Expr) -> int:
    return sum(1 for _ in postorder(expr))


def compile_exprs(exprs: Sequence[Expr], names: Sequence[str]):
    """Straight-line Python function of the named variables returning every value in ``exprs``.

    Much faster than :func:`evaluate` when one formula is evaluated under many models.
    """
    slots: dict[Expr, str] = {}
    index = {n: i for i, n in enumerate(names)}
    params = ", ".join(f"v{i}" for i in range(len(names)))
    lines = [f"def _fn({params}):"]
    env: dict = {"_op": apply_op}
    for root in exprs:
        for node in postorder(root):
            if node in slots:
                continue
            kind = node.kind
            if kind is K.BvConst or kind is K.BoolConst:
                slots[node] = str(node.params[0])
                continue
            if kind is K.BvVar:
                slots[node] = f"(v{index[node.params[0]]} & {mask(node.width)})"
                continue
            tmp = f"t{len(slots)}"
            env[f"_{tmp}"] = (node.kind, node.params, tuple(a.width for a in node.args))
            args = "".join(slots[a] + ", " for a in node.args)
            lines.append(f"    {tmp} = _op(*_{tmp}[:2], _{tmp}[2], ({args}), {node.width})")
            slots[node] = tmp
    lines.append(f"    return ({''.join(slots[e] + ', ' for e in exprs)})")
    exec("\n".join(lines), env)
    return env["_fn"]
