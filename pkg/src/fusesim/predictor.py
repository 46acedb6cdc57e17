"""PC-signature read-level predictor.

A small sampler watches requests from a few warps.  Reuse of a sampled line
pulls the history counter of the PC that brought it in toward 0; eviction of
an unused sampled line pushes it toward 15.  ``classify`` maps a PC's counter
and last observed operation to a read-level prediction.
"""
from __future__ import annotations

import csv
import enum
import io
from collections import OrderedDict
from dataclasses import dataclass

from .trace import TraceRecord

SAMPLER_SETS = 4
SAMPLER_WAYS = 8
SAMPLED_WARPS = (0, 12, 24, 36)
HISTORY_ENTRIES = 512
COUNTER_INIT = 8
COUNTER_MAX = 15
UNUSED_THRESHOLD = 14
REUSE_THRESHOLD = 1

TAG_MASK = (1 << 15) - 1
SIG_MASK = (1 << 9) - 1


class Prediction(enum.Enum):
    WORO = "WORO"
    WORM = "WORM"
    WM = "WM"
    NEUTRAL = "Neutral"


class Status(enum.Enum):
    R = "R"
    W = "W"


def sampler_tag(addr: int) -> int:
    """Line-address bits [21:7]."""
    return (addr >> 7) & TAG_MASK


def signature(pc: int) -> int:
    """PC bits [10:2]."""
    return (pc >> 2) & SIG_MASK


@dataclass(slots=True)
class SamplerEntry:
    tag: int
    signature: int
    used: bool = False
    valid: bool = True


@dataclass(slots=True)
class HistoryEntry:
    counter: int = COUNTER_INIT
    status: Status = Status.R


class ReadLevelPredictor:
    def __init__(self, entries: int = HISTORY_ENTRIES, sampled_warps: tuple[int, ...] = SAMPLED_WARPS,
                 ways: int = SAMPLER_WAYS, unused_threshold: int = UNUSED_THRESHOLD,
                 reuse_threshold: int = REUSE_THRESHOLD):
        if entries <= 0:
            raise ValueError("history table needs entries")
        self.entries = entries
        self.sampled_warps = tuple(sampled_warps)
        self._set_of = {w: i for i, w in enumerate(self.sampled_warps)}
        self.ways = ways
        self.unused_threshold = unused_threshold
        self.reuse_threshold = reuse_threshold
        # each set is tag -> entry, least recently used first
        self.sampler: list[OrderedDict[int, SamplerEntry]] = [OrderedDict() for _ in self.sampled_warps]
        self.table = [HistoryEntry() for _ in range(entries)]
        self.observed = 0

    def _index(self, sig: int) -> int:
        return sig % self.entries

    def entry(self, pc: int) -> HistoryEntry:
        return self.table[self._index(signature(pc))]

    def observe(self, record: TraceRecord) -> None:
        set_idx = self._set_of.get(record.warp_id)
        if set_idx is None:
            return
        self.observed += 1
        sset = self.sampler[set_idx]
        tag = sampler_tag(record.addr)
        sig = signature(record.pc)
        hit = sset.get(tag)
        if hit is not None:
            hist = self.table[self._index(hit.signature)]
            if hist.counter > 0:
                hist.counter -= 1
            hist.status = Status.W if record.is_write else Status.R
            hit.used = True
            hit.signature = sig
            sset.move_to_end(tag)
            return
        if len(sset) >= self.ways:
            _, victim = sset.popitem(last=False)
            if not victim.used:
                hist = self.table[self._index(victim.signature)]
                if hist.counter < COUNTER_MAX:
                    hist.counter += 1
        sset[tag] = SamplerEntry(tag, sig)

    def classify_sig(self, sig: int) -> Prediction:
        hist = self.table[self._index(sig)]
        c = hist.counter
        if c > self.unused_threshold:
            return Prediction.WORO
        if c <= self.reuse_threshold:
            return Prediction.WORM if hist.status is Status.R else Prediction.WM
        return Prediction.NEUTRAL

    def classify(self, pc: int) -> Prediction:
        return self.classify_sig(signature(pc))

    def lru_tags(self, set_idx: int) -> list[int]:
        return list(self.sampler[set_idx])

    def dump_csv(self) -> str:
        """History table as ``signature,counter,status`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["signature", "counter", "status"])
        for sig, h in enumerate(self.table):
            w.writerow([sig, h.counter, h.status.value])
        return buf.getvalue()
