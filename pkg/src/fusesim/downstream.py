"""Aggregate-latency model of the shared L2 and DRAM behind an L1D."""
from __future__ import annotations

import heapq
from collections import OrderedDict
from dataclasses import dataclass


@dataclass(frozen=True)
class DownstreamConfig:
    """``l2_capacity_bytes`` / ``l2_ways`` fix the L2; its set count is derived
    (786KB at 8 ways and 128B lines is 786 sets, indexed modulo)."""

    l2_enabled: bool = True
    l2_capacity_bytes: int = 786 * 1024
    l2_ways: int = 8
    line_bytes: int = 128
    l2_round_trip_cycles: int = 60
    dram_extra_cycles: int = 160

    def __post_init__(self) -> None:
        if self.l2_round_trip_cycles <= 0 or self.dram_extra_cycles <= 0:
            raise ValueError("downstream latencies must be positive")
        if self.l2_enabled and self.l2_sets <= 0:
            raise ValueError("L2 smaller than one set")

    @property
    def l2_sets(self) -> int:
        return self.l2_capacity_bytes // (self.line_bytes * self.l2_ways)


class Downstream:
    """Serves L1D misses and writebacks.

    ``request`` returns the completion cycle.  Demand requests are also queued
    so the engine can collect them with :meth:`pop_ready`; writebacks are not.
    """

    def __init__(self, config: DownstreamConfig | None = None):
        self.config = config or DownstreamConfig()
        cfg = self.config
        self._sets = [OrderedDict() for _ in range(cfg.l2_sets)] if cfg.l2_enabled else []
        self._inflight: list[tuple[int, int, int, object]] = []
        self._seq = 0
        self.requests = 0
        self.demand_requests = 0
        self.writebacks = 0
        self.l2_hits = 0
        self.l2_misses = 0

    def _l2_access(self, line: int) -> bool:
        s = self._sets[line % len(self._sets)]
        if line in s:
            s.move_to_end(line)
            return True
        if len(s) >= self.config.l2_ways:
            s.popitem(last=False)
        s[line] = None
        return False

    def latency(self, line: int) -> int:
        cfg = self.config
        if cfg.l2_enabled and self._l2_access(line):
            self.l2_hits += 1
            return cfg.l2_round_trip_cycles
        self.l2_misses += 1
        return cfg.l2_round_trip_cycles + cfg.dram_extra_cycles

    def request(self, line: int, is_writeback: bool, issue_cycle: int, token: object = None) -> int:
        self.requests += 1
        done = issue_cycle + self.latency(line)
        if is_writeback:
            self.writebacks += 1
        else:
            self.demand_requests += 1
            heapq.heappush(self._inflight, (done, self._seq, line, token))
            self._seq += 1
        return done

    def next_completion(self) -> int | None:
        return self._inflight[0][0] if self._inflight else None

    def pop_ready(self, now: int) -> list[tuple[int, object]]:
        """``(line, token)`` of demand requests completing by ``now``, in order."""
        out = []
        heap = self._inflight
        while heap and heap[0][0] <= now:
            _, _, line, token = heapq.heappop(heap)
            out.append((line, token))
        return out

    @property
    def pending(self) -> int:
        return len(self._inflight)
