"""STT-MRAM bank: set-associative FIFO, or approximately fully-associative
with a CBF-guided serialized tag search, plus the tag queue that serves it.

In approximate mode the slots are split into partitions of
``comparators`` consecutive slots, each guarded by one counting bloom
filter.  A search tests every filter (free), then polls the positive
partitions in ascending order, one partition per cycle.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Iterator, NamedTuple

from .cbf import DEFAULT_COUNTERS, DEFAULT_HASHES, FilterBank, HashFamily
from .geometry import CacheGeometry
from .sram_bank import EvictedLine, Replacement, SetAssocBank

COMPARATORS = 4
TAG_QUEUE_DEPTH = 16


class DuplicateInsert(AssertionError):
    pass


class SearchResult(NamedTuple):
    hit: bool
    slot: int | None
    search_cycles: int
    positives: int = 0


@dataclass
class SttStats:
    searches: int = 0
    search_cycles: int = 0
    hits: int = 0
    inserts: int = 0
    evictions: int = 0

    @property
    def mean_search_cycles(self) -> float:
        return self.search_cycles / self.searches if self.searches else 0.0


class SetAssocStt:
    """Set-associative STT bank with per-set FIFO replacement.

    The tag lookup is a single cycle; ``status`` and ``search`` agree exactly.
    """

    approximate = False

    def __init__(self, geom: CacheGeometry, read_cycles: int = 1, write_cycles: int = 5):
        self.geom = geom
        self.read_cycles = read_cycles
        self.write_cycles = write_cycles
        self.tags = SetAssocBank(geom, Replacement.FIFO, read_cycles, write_cycles)
        self.stats = SttStats()
        self.filters: FilterBank | None = None

    @property
    def capacity(self) -> int:
        return self.geom.lines

    @property
    def occupancy(self) -> int:
        return self.tags.occupancy

    def status(self, line: int) -> bool:
        return self.tags.lookup(line)

    def search(self, line: int) -> SearchResult:
        hit = self.tags.lookup(line)
        st = self.stats
        st.searches += 1
        st.search_cycles += 1
        st.hits += hit
        return SearchResult(hit, None, 1, int(hit))

    def insert(self, line: int, fill_sig: int = 0, dirty: bool = False) -> EvictedLine | None:
        if self.tags.lookup(line):
            raise DuplicateInsert(f"line {line:#x} already in STT")
        self.stats.inserts += 1
        victim = self.tags.fill(line, fill_sig, dirty)
        if victim is not None:
            self.stats.evictions += 1
        return victim

    def write_in_place(self, line: int) -> None:
        entry = self.tags.get(line)
        if entry is None:
            raise KeyError(line)
        entry.dirty = True

    def invalidate(self, line: int) -> bool:
        return self.tags.invalidate(line)

    def lines(self) -> Iterator[int]:
        return self.tags.lines()

    def line_set(self) -> set[int]:
        return self.tags.line_set()

    def is_dirty(self, line: int) -> bool:
        entry = self.tags.get(line)
        return bool(entry and entry.dirty)

    def fill_sig_of(self, line: int) -> int:
        return self.tags.get(line).fill_sig


class ApproxFAStt:
    """Fully-associative FIFO tag array searched through counting bloom filters."""

    approximate = True

    def __init__(self, slots: int = 512, read_cycles: int = 1, write_cycles: int = 5,
                 comparators: int = COMPARATORS, family: HashFamily | None = None):
        if slots <= 0 or slots % comparators:
            raise ValueError(f"{slots} slots do not split into partitions of {comparators}")
        self.n_slots = slots
        self.read_cycles = read_cycles
        self.write_cycles = write_cycles
        self.comparators = comparators
        self.n_partitions = slots // comparators
        self.family = family or HashFamily(DEFAULT_HASHES, DEFAULT_COUNTERS)
        self.filters = FilterBank(self.n_partitions, self.family)
        self.tags = [-1] * slots
        self.dirty = [False] * slots
        self.sigs = [0] * slots
        self.cursor = 0
        self.occupancy = 0
        self.stats = SttStats()

    @property
    def capacity(self) -> int:
        return self.n_slots

    def partition_of(self, slot: int) -> int:
        return slot // self.comparators

    def status(self, line: int) -> bool:
        return self.filters.positive_mask(line) != 0

    def _poll(self, line: int) -> tuple[int | None, int, int]:
        """Poll positive partitions in order; return (slot, polled, positives)."""
        mask = self.filters.positive_mask(line)
        positives = polled = 0
        found = None
        tags = self.tags
        width = self.comparators
        while mask:
            low = mask & -mask
            mask ^= low
            positives += 1
            if found is not None:
                continue
            polled += 1
            base = (low.bit_length() - 1) * width
            for slot in range(base, base + width):
                if tags[slot] == line:
                    found = slot
                    break
        return found, polled, positives

    def search(self, line: int) -> SearchResult:
        slot, polled, positives = self._poll(line)
        hit = slot is not None
        cycles = polled if polled > 1 else 1
        self.filters.record_search(positives, hit)
        st = self.stats
        st.searches += 1
        st.search_cycles += cycles
        st.hits += hit
        return SearchResult(hit, slot, cycles, positives)

    def insert(self, line: int, fill_sig: int = 0, dirty: bool = False) -> EvictedLine | None:
        if self._poll(line)[0] is not None:
            raise DuplicateInsert(f"line {line:#x} already in STT")
        slot = self.cursor
        victim = None
        old = self.tags[slot]
        if old >= 0:
            self.filters.decrement(slot // self.comparators, old)
            victim = EvictedLine(old, self.dirty[slot], self.sigs[slot])
            self.stats.evictions += 1
        else:
            self.occupancy += 1
        self.tags[slot] = line
        self.dirty[slot] = dirty
        self.sigs[slot] = fill_sig
        self.filters.increment(slot // self.comparators, line)
        self.cursor = (slot + 1) % self.n_slots
        self.stats.inserts += 1
        return victim

    def write_in_place(self, line: int) -> None:
        slot = self._poll(line)[0]
        if slot is None:
            raise KeyError(line)
        self.dirty[slot] = True

    def invalidate(self, line: int) -> bool:
        slot = self._poll(line)[0]
        if slot is None:
            return False
        self.filters.decrement(slot // self.comparators, line)
        self.tags[slot] = -1
        self.dirty[slot] = False
        self.occupancy -= 1
        return True

    def lines(self) -> Iterator[int]:
        return (t for t in self.tags if t >= 0)

    def line_set(self) -> set[int]:
        out = set(self.tags)
        out.discard(-1)
        return out

    def is_dirty(self, line: int) -> bool:
        slot = self._poll(line)[0]
        return slot is not None and self.dirty[slot]

    def fill_sig_of(self, line: int) -> int:
        slot = self._poll(line)[0]
        if slot is None:
            raise KeyError(line)
        return self.sigs[slot]

    def partition_tags(self, p: int) -> list[int]:
        base = p * self.comparators
        return [t for t in self.tags[base: base + self.comparators] if t >= 0]


SttBank = SetAssocStt | ApproxFAStt


def make_stt_bank(geom: CacheGeometry, approx_fa: bool, read_cycles: int = 1, write_cycles: int = 5,
                  hashes: int = DEFAULT_HASHES, counters: int = DEFAULT_COUNTERS, seed: int = 0):
    if approx_fa:
        return ApproxFAStt(geom.lines, read_cycles, write_cycles, COMPARATORS, HashFamily(hashes, counters, seed))
    return SetAssocStt(geom, read_cycles, write_cycles)


# ---------------------------------------------------------------------------
# tag queue


class Cmd(enum.Enum):
    READ = "Read"
    WRITE = "Write"
    FILL = "F"


class Enqueue(enum.Enum):
    ACCEPTED = "accepted"
    QUEUE_FULL = "queue_full"


@dataclass(eq=False)
class TagEntry:
    """One pending STT operation.

    ``dirty``/``fill_sig`` describe the data for WRITE and FILL entries;
    ``ref`` is an opaque handle owned by the controller (a swap slot or a
    waiting request).
    """

    cmd: Cmd
    line: int
    dirty: bool = False
    fill_sig: int = 0
    ref: Any = None


@dataclass
class CompletionEvent:
    entry: TagEntry
    start: int
    finish: int
    hit: bool = False
    search_cycles: int = 0
    evicted: EvictedLine | None = None

    @property
    def latency(self) -> int:
        return self.finish - self.start


@dataclass
class _InService:
    entry: TagEntry
    start: int
    finish: int
    result: SearchResult | None = None


@dataclass
class TagQueue:
    """FIFO of STT operations served one at a time.

    A READ entry searches when it reaches the head and then spends one cycle
    reading data on a hit (search cycles only on a miss).  WRITE and FILL
    entries occupy the bank for the write latency and take effect when they
    finish.  The in-service entry counts toward the capacity.
    """

    bank: Any
    capacity: int = TAG_QUEUE_DEPTH
    waiting: deque = field(default_factory=deque)
    current: _InService | None = None
    free_at: int = 0
    flushes: int = 0
    served: int = 0

    def __len__(self) -> int:
        return len(self.waiting) + (self.current is not None)

    @property
    def full(self) -> bool:
        return len(self) >= self.capacity

    def entries(self) -> list[TagEntry]:
        head = [self.current.entry] if self.current else []
        return head + list(self.waiting)

    def enqueue(self, entry: TagEntry) -> Enqueue:
        if len(self) >= self.capacity:
            return Enqueue.QUEUE_FULL
        self.waiting.append(entry)
        return Enqueue.ACCEPTED

    def _start(self, entry: TagEntry, t: int) -> None:
        if entry.cmd is Cmd.READ:
            res = self.bank.search(entry.line)
            dur = res.search_cycles + (self.bank.read_cycles if res.hit else 0)
            self.current = _InService(entry, t, t + dur, res)
        else:
            self.current = _InService(entry, t, t + self.bank.write_cycles)

    def _finish(self) -> CompletionEvent:
        cur = self.current
        self.current = None
        self.free_at = cur.finish
        self.served += 1
        entry = cur.entry
        if entry.cmd is Cmd.READ:
            res = cur.result
            return CompletionEvent(entry, cur.start, cur.finish, res.hit, res.search_cycles)
        evicted = self.bank.insert(entry.line, entry.fill_sig, entry.dirty)
        return CompletionEvent(entry, cur.start, cur.finish, evicted=evicted)

    def next_event(self) -> int | None:
        if self.current is not None:
            return self.current.finish
        if self.waiting:
            return self.free_at
        return None

    def tick(self, now: int) -> list[CompletionEvent]:
        """Advance the server to ``now``: retire a finished entry, start the next."""
        events = []
        if self.current is not None and self.current.finish <= now:
            events.append(self._finish())
        if self.current is None and self.waiting and now >= self.free_at:
            self._start(self.waiting.popleft(), now)
        return events

    def drain(self, now: int) -> tuple[int, list[CompletionEvent]]:
        """Serve every pending entry to completion; return (end cycle, events).

        Counts one flush when anything was pending.
        """
        if not len(self):
            return now, []
        self.flushes += 1
        events = []
        if self.current is not None:
            events.append(self._finish())
        while self.waiting:
            self._start(self.waiting.popleft(), max(now, self.free_at))
            events.append(self._finish())
        end = max(now, self.free_at)
        return end, events
