"""Set-associative cache bank keyed by line address (``byte_addr >> 7``)."""
from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterator, NamedTuple

from .geometry import CacheGeometry, OFFSET_BITS


class Replacement(enum.Enum):
    LRU = "lru"
    FIFO = "fifo"


@dataclass(slots=True)
class CacheLine:
    tag: int
    dirty: bool = False
    fill_sig: int = 0
    valid: bool = True


class AccessOutcome(NamedTuple):
    hit: bool
    dirty_set: bool
    latency_cycles: int


class EvictedLine(NamedTuple):
    line: int
    dirty: bool
    fill_sig: int

    @property
    def addr(self) -> int:
        return self.line << OFFSET_BITS


class SetAssocBank:
    """Tag store of one bank.  Each set is an ordered dict ``tag -> CacheLine``
    kept oldest-first, so the first entry is the replacement victim under both
    LRU (hits move to the end) and FIFO (hits do not)."""

    def __init__(self, geom: CacheGeometry, policy: Replacement = Replacement.LRU,
                 read_cycles: int = 1, write_cycles: int = 1):
        self.geom = geom
        self.policy = policy
        self.read_cycles = read_cycles
        self.write_cycles = write_cycles
        self._set_mask = geom.sets - 1
        self._index_bits = geom.index_bits
        self.sets: list[OrderedDict[int, CacheLine]] = [OrderedDict() for _ in range(geom.sets)]
        self.occupancy = 0
        self._resident: set[int] = set()

    def _locate(self, line: int) -> tuple[OrderedDict[int, CacheLine], int]:
        return self.sets[line & self._set_mask], line >> self._index_bits

    def lookup(self, line: int) -> bool:
        s, tag = self._locate(line)
        return tag in s

    __contains__ = lookup

    def way_of(self, line: int) -> int | None:
        """Recency/age rank of ``line`` within its set (0 = next victim)."""
        s, tag = self._locate(line)
        for i, t in enumerate(s):
            if t == tag:
                return i
        return None

    def get(self, line: int) -> CacheLine | None:
        s, tag = self._locate(line)
        return s.get(tag)

    def access(self, line: int, is_write: bool) -> AccessOutcome:
        s, tag = self._locate(line)
        entry = s.get(tag)
        if entry is None:
            return AccessOutcome(False, False, self.read_cycles)
        if self.policy is Replacement.LRU:
            s.move_to_end(tag)
        if is_write:
            entry.dirty = True
            return AccessOutcome(True, True, self.write_cycles)
        return AccessOutcome(True, False, self.read_cycles)

    def victim_for(self, line: int) -> EvictedLine | None:
        """The line a fill of ``line`` would displace, without changing state."""
        s, tag = self._locate(line)
        if tag in s or len(s) < self.geom.ways:
            return None
        vtag, v = next(iter(s.items()))
        return EvictedLine(self._line_of(vtag, line & self._set_mask), v.dirty, v.fill_sig)

    def _line_of(self, tag: int, set_index: int) -> int:
        return (tag << self._index_bits) | set_index

    def fill(self, line: int, fill_sig: int = 0, dirty: bool = False) -> EvictedLine | None:
        s, tag = self._locate(line)
        if tag in s:
            raise AssertionError(f"line {line:#x} already resident")
        victim = None
        if len(s) >= self.geom.ways:
            vtag, v = s.popitem(last=False)
            victim = EvictedLine(self._line_of(vtag, line & self._set_mask), v.dirty, v.fill_sig)
            self._resident.discard(victim.line)
        else:
            self.occupancy += 1
        s[tag] = CacheLine(tag, dirty, fill_sig)
        self._resident.add(line)
        return victim

    def invalidate(self, line: int) -> bool:
        s, tag = self._locate(line)
        if s.pop(tag, None) is None:
            return False
        self.occupancy -= 1
        self._resident.discard(line)
        return True

    def order(self, set_index: int) -> list[int]:
        """Line addresses of one set, next victim first."""
        return [self._line_of(t, set_index) for t in self.sets[set_index]]

    def lines(self) -> Iterator[int]:
        for idx, s in enumerate(self.sets):
            for tag in s:
                yield self._line_of(tag, idx)

    def line_set(self) -> set[int]:
        """Resident line addresses (a fresh set)."""
        return set(self._resident)

    def resident(self) -> dict[int, CacheLine]:
        return {self._line_of(t, i): e for i, s in enumerate(self.sets) for t, e in s.items()}


class SramBank(SetAssocBank):
    """SRAM bank: true LRU, 1-cycle reads and writes."""

    def __init__(self, geom: CacheGeometry, read_cycles: int = 1, write_cycles: int = 1,
                 policy: Replacement = Replacement.LRU):
        super().__init__(geom, policy, read_cycles, write_cycles)

    def lru_order(self, set_index: int) -> list[int]:
        return self.order(set_index)
