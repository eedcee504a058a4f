"""Constraint slicing and input reconstruction from solver models."""

from __future__ import annotations

from typing import Iterable

from .state import PathConstraint, var_offset

SLICED_KINDS = ("branch", "model", "pin")


def slice_path(path: Iterable[PathConstraint], seed_vars) -> list[PathConstraint]:
    """Constraints transitively sharing variables with ``seed_vars``, in original order.

    Tie constraints only restate the concrete return of a modeled call and are
    never part of a slice; they would pin every value to the current run.
    """
    items = [c for c in path if c.kind in SLICED_KINDS]
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in items:
        vs = iter(c.vars)
        first = next(vs, None)
        if first is None:
            continue
        root = find(first)
        for v in vs:
            other = find(v)
            if other != root:
                parent[other] = root
    seeds = {find(v) for v in seed_vars}
    return [c for c in items if c.vars and find(next(iter(c.vars))) in seeds]


def generate_input(model: dict, original: bytes) -> bytes:
    """Original input with the bytes named in ``model`` replaced."""
    out = bytearray(original)
    for name, value in model.items():
        off = var_offset(name)
        if off is not None and 0 <= off < len(out):
            out[off] = value & 0xFF
    return bytes(out)
