"""Shadow heap and shadow stack kept alongside a concolic session."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field


class FreeUnknown(ValueError):
    """free() of an address that is not the base of a live block."""


class DoubleFree(FreeUnknown):
    pass


@dataclass
class ShadowHeap:
    blocks: dict[int, int] = field(default_factory=dict)
    allocations: int = 0
    frees: int = 0

    def __post_init__(self):
        self._bases = sorted(self.blocks)
        self._freed: set[int] = set()

    def insert(self, base: int, size: int):
        if base in self.blocks:
            raise ValueError(f"block at {base:#x} already live")
        self.blocks[base] = size
        bisect.insort(self._bases, base)
        self._freed.discard(base)
        self.allocations += 1

    def remove(self, base: int) -> int:
        size = self.blocks.pop(base, None)
        if size is None:
            if base in self._freed:
                raise DoubleFree(f"{base:#x} freed twice")
            raise FreeUnknown(f"{base:#x} is not a live block")
        self._bases.remove(base)
        self._freed.add(base)
        self.frees += 1
        return size

    def lookup(self, addr: int) -> tuple[int, int] | None:
        """The live block containing ``addr`` as (base, size)."""
        i = bisect.bisect_right(self._bases, addr) - 1
        if i < 0:
            return None
        base = self._bases[i]
        size = self.blocks[base]
        return (base, size) if addr < base + size else None

    def size_of(self, base: int) -> int | None:
        return self.blocks.get(base)

    def disjoint(self) -> bool:
        ends = [(b, b + self.blocks[b]) for b in self._bases]
        return all(e1 <= b2 for (_, e1), (b2, _) in zip(ends, ends[1:]))


@dataclass
class ShadowStack:
    """Return-address slot addresses; the newest (lowest) slot is last."""

    slots: list[int] = field(default_factory=list)

    def pop_below(self, sp: int):
        while self.slots and self.slots[-1] < sp:
            self.slots.pop()

    def on_call(self, slot: int):
        self.pop_below(slot)
        self.slots.append(slot)

    def on_ret(self, sp: int):
        self.pop_below(sp)

    def upper_for(self, addr: int) -> int | None:
        """Closest return-address slot at or above ``addr``."""
        above = [s for s in self.slots if s >= addr]
        return min(above) if above else None

    def __contains__(self, addr: int) -> bool:
        return addr in self.slots
