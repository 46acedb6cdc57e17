"""L1D arbitration: routes each request over the SRAM bank, STT-MRAM bank,
swap buffer, tag queue and MSHR, and keeps every line in at most one place.

Two operating styles share this class:

* non-blocking (swap buffer + tag queue present): STT reads and writes are
  queued and served in the background, SRAM victims bound for STT wait in the
  swap buffer, and only an STT write hit (or a WM-predicted read hit) drains
  the queue synchronously;
* blocking: STT searches occupy the request port and every STT write stalls
  all issue for the write latency.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from .downstream import Downstream
from .geometry import ConfigPreset
from .predictor import Prediction, ReadLevelPredictor, signature
from .sram_bank import EvictedLine, SramBank
from .stt_bank import Cmd, CompletionEvent, TagEntry, TagQueue, make_stt_bank
from .trace import TraceRecord

SWAP_SLOTS = 3
MSHR_ENTRIES = 32


class OrphanFill(AssertionError):
    """A downstream fill arrived for a line with no MSHR entry."""


class StallCause(enum.Enum):
    STT_WRITE = "stt_write"
    TAG_SEARCH = "tag_search"
    TAG_QUEUE_FULL = "tag_queue_full"
    SWAP_FULL = "swap_full"
    MSHR_FULL = "mshr_full"


class Bank(enum.Enum):
    SRAM = "sram"
    STT = "stt"


class ServedBy(enum.Enum):
    SRAM = "sram"
    STT = "stt"
    FILL = "fill"
    DOWNSTREAM = "downstream"
    PENDING = "pending"


class Probe(enum.Enum):
    HIT = "hit"
    MISS = "miss"
    BUSY = "busy"


@dataclass
class StatusRegisters:
    sram: Probe = Probe.MISS
    stt: Probe = Probe.MISS
    approx: Probe = Probe.MISS


@dataclass(eq=False)
class Request:
    rid: int
    record: TraceRecord
    arrival: int
    done: int | None = None
    served_by: ServedBy | None = None

    @property
    def latency(self) -> int | None:
        return None if self.done is None else self.done - self.arrival


@dataclass
class RequestDisposition:
    served_by: ServedBy | None = None
    latency: int | None = None
    stall: StallCause | None = None


@dataclass(eq=False)
class SwapSlot:
    line: int
    dirty: bool
    fill_sig: int


class SwapBuffer:
    def __init__(self, slots: int = SWAP_SLOTS):
        self.capacity = slots
        self.slots: list[SwapSlot] = []

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def full(self) -> bool:
        return len(self.slots) >= self.capacity

    def put(self, victim: EvictedLine) -> SwapSlot:
        if self.full:
            raise AssertionError("swap buffer overflow")
        slot = SwapSlot(victim.line, victim.dirty, victim.fill_sig)
        self.slots.append(slot)
        return slot

    def release(self, slot: SwapSlot) -> None:
        self.slots.remove(slot)

    def holds(self, line: int) -> bool:
        return any(s.line == line for s in self.slots)

    def lines(self) -> list[int]:
        return [s.line for s in self.slots]


@dataclass(eq=False)
class MshrEntry:
    line: int
    destination: Bank
    issue_cycle: int
    fill_sig: int
    prediction: Prediction | None
    alloc_rid: int
    waiters: list[Request] = field(default_factory=list)
    dirty: bool = False
    extra_writes: int = 0
    installing: TagEntry | None = None

    @property
    def merged_count(self) -> int:
        return len(self.waiters)


class MshrTable:
    def __init__(self, capacity: int = MSHR_ENTRIES):
        self.capacity = capacity
        self.entries: dict[int, MshrEntry] = {}
        self.allocations = 0
        self.merges = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, line: int) -> bool:
        return line in self.entries

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    def get(self, line: int) -> MshrEntry | None:
        return self.entries.get(line)

    def allocate(self, entry: MshrEntry) -> MshrEntry:
        if entry.line in self.entries:
            raise AssertionError(f"duplicate MSHR entry for {entry.line:#x}")
        if self.full:
            raise AssertionError("MSHR overflow")
        self.entries[entry.line] = entry
        self.allocations += 1
        return entry

    def retire(self, line: int) -> MshrEntry:
        return self.entries.pop(line)


@dataclass
class Residency:
    prediction: Prediction
    writes: int
    scored: bool


@dataclass
class ControllerCounters:
    accesses: int = 0
    sram_hits: int = 0
    stt_hits: int = 0
    misses: int = 0
    bypasses: int = 0
    sram_reads: int = 0
    sram_writes: int = 0
    stt_in_place_writes: int = 0
    migrations_sram_to_stt: int = 0
    migrations_stt_to_sram: int = 0
    fill_blocks: int = 0


@dataclass
class ControllerConfig:
    mshr_entries: int = MSHR_ENTRIES
    swap_slots: int = SWAP_SLOTS
    tag_queue_depth: int = 16
    history_entries: int = 512
    cbf_hashes: int = 3
    cbf_counters: int = 128
    seed: int = 0


class Controller:
    def __init__(self, preset: ConfigPreset, downstream: Downstream | None = None,
                 config: ControllerConfig | None = None, warmup_rid: int = 0):
        self.preset = preset
        self.config = cfg = config or ControllerConfig()
        p = preset.params
        feats = preset.features
        self.params = p
        self.downstream = downstream or Downstream()
        self.sram = SramBank(preset.sram_geom, p.sram_read_cyc, p.sram_write_cyc) if preset.sram_geom else None
        self.stt = (make_stt_bank(preset.stt_geom, feats.approx_fa, p.stt_read_cyc, p.stt_write_cyc,
                                  cfg.cbf_hashes, cfg.cbf_counters, cfg.seed)
                    if preset.stt_geom else None)
        self.nonblocking = feats.non_blocking and self.stt is not None and self.sram is not None
        self.tq = TagQueue(self.stt, cfg.tag_queue_depth) if self.nonblocking else None
        self.swap = SwapBuffer(cfg.swap_slots) if self.nonblocking else None
        self.predictor = (ReadLevelPredictor(cfg.history_entries)
                          if feats.predictor or feats.deadwrite_bypass else None)
        self.route_by_prediction = feats.predictor
        self.bypass = feats.deadwrite_bypass
        self.mshr = MshrTable(cfg.mshr_entries)
        self.status = StatusRegisters()
        self.counters = ControllerCounters()
        self.warmup_rid = warmup_rid
        self.residency: dict[int, Residency] = {}
        self.prediction_log: list[tuple[Prediction, int]] = []
        self.pending_fills: deque[MshrEntry] = deque()
        self.deferred: deque[tuple[Request, int]] = deque()
        self.last_fill_cycle = -1
        # blocking modes: the whole request port; non-blocking: the STT side only
        self.port_free_at = 0
        self.port_cause = StallCause.TAG_SEARCH
        self.stt_free_at = 0
        self.stt_cause = StallCause.TAG_SEARCH
        # SRAM lines whose data lands after the fill was recorded (migrations)
        self.sram_ready: dict[int, int] = {}
        self.busy_until = 0
        self.outstanding = 0
        self.completed: list[Request] = []
        self.latency_sum = 0
        self.last_done = 0
        self.keep_requests = False

    # -- helpers -----------------------------------------------------------

    @property
    def probe_cycles(self) -> int:
        return self.params.sram_read_cyc if self.sram is not None else 0

    def _classify_pc(self, pc: int) -> Prediction:
        if self.predictor is None:
            return Prediction.NEUTRAL
        return self.predictor.classify(pc)

    def _finish(self, req: Request, t: int, served_by: ServedBy) -> None:
        req.done = t
        req.served_by = served_by
        self.latency_sum += t - req.arrival
        if t > self.last_done:
            self.last_done = t
        if self.keep_requests:
            self.completed.append(req)

    def _pend(self, req: Request) -> None:
        req.served_by = ServedBy.PENDING
        self.outstanding += 1

    def _finish_pending(self, req: Request, t: int, served_by: ServedBy) -> None:
        self.outstanding -= 1
        self._finish(req, t, served_by)

    def _note_write(self, line: int) -> None:
        res = self.residency.get(line)
        if res is not None:
            res.writes += 1

    def _begin_residency(self, entry: MshrEntry) -> None:
        if entry.prediction is None:
            return
        writes = 1 + entry.extra_writes
        self.residency[entry.line] = Residency(entry.prediction, writes, entry.alloc_rid >= self.warmup_rid)

    def _end_residency(self, line: int) -> None:
        res = self.residency.pop(line, None)
        if res is not None and res.scored:
            self.prediction_log.append((res.prediction, res.writes))

    def close_residencies(self) -> None:
        for line in list(self.residency):
            self._end_residency(line)

    def _writeback(self, line: int, t: int) -> None:
        self.downstream.request(line, True, t)

    def _leave_l1(self, victim: EvictedLine, t: int) -> None:
        if victim.dirty:
            self._writeback(victim.line, t)
        self._end_residency(victim.line)

    def _victim_to_stt(self, victim: EvictedLine) -> bool:
        """Whether an SRAM victim moves to STT (else it leaves the L1D)."""
        if self.stt is None:
            return False
        if self.route_by_prediction and self.predictor.classify_sig(victim.fill_sig) is Prediction.WORO:
            return False
        return True

    # -- structural state --------------------------------------------------

    def blocked_cause(self, now: int) -> StallCause | None:
        """Cause that prevents any issue at ``now``, before looking at the request."""
        if now < self.port_free_at:
            return self.port_cause
        if not self.nonblocking and now < self.busy_until:
            return StallCause.STT_WRITE
        return None

    def idle(self) -> bool:
        return (self.outstanding == 0 and not self.mshr.entries and not self.pending_fills
                and not self.deferred and (self.tq is None or len(self.tq) == 0))

    def next_event(self, now: int) -> int | None:
        cands = []
        if self.pending_fills or self.deferred:
            cands.append(now + 1)
        if self.tq is not None:
            t = self.tq.next_event()
            if t is not None:
                cands.append(max(t, now + 1))
        nxt = self.downstream.next_completion()
        if nxt is not None:
            cands.append(max(nxt, now + 1))
        return min(cands) if cands else None

    def unblock_time(self, now: int) -> int | None:
        if now < self.port_free_at:
            return self.port_free_at
        if self.nonblocking and now < self.stt_free_at:
            return self.stt_free_at
        if not self.nonblocking and now < self.busy_until:
            return self.busy_until
        return None

    # -- request path ------------------------------------------------------

    def handle(self, req: Request, now: int) -> RequestDisposition:
        """Issue ``req`` at cycle ``now``.

        Returns a disposition with ``stall`` set (and no state changed) when a
        structural hazard prevents issue.
        """
        rec = req.record
        line = rec.line
        is_write = rec.is_write

        # hazards that can be decided before touching any state
        sram_hit = self.sram is not None and self.sram.lookup(line)
        in_mshr = not sram_hit and line in self.mshr
        stt_positive = False
        if not sram_hit and not in_mshr and self.stt is not None:
            stt_positive = (self.swap is not None and self.swap.holds(line)) or self.stt.status(line)
        if self.nonblocking and not sram_hit and now < self.stt_free_at:
            # a drain is in progress; only SRAM hits get through
            return RequestDisposition(stall=self.stt_cause)
        needs_sync = False
        if stt_positive and self.nonblocking:
            needs_sync = is_write or (self.route_by_prediction and self._classify_pc(rec.pc) is Prediction.WM)
            if not needs_sync and self.tq.full:
                return RequestDisposition(stall=StallCause.TAG_QUEUE_FULL)
        if not sram_hit and not in_mshr and not stt_positive and self.mshr.full:
            bypassing = self.bypass and self._classify_pc(rec.pc) is Prediction.WORO
            if not bypassing:
                return RequestDisposition(stall=StallCause.MSHR_FULL)

        # committed from here on
        c = self.counters
        c.accesses += 1
        if self.predictor is not None:
            self.predictor.observe(rec)
        self.status = StatusRegisters()
        t1 = now + self.probe_cycles
        if self.sram is not None:
            c.sram_reads += 1
            if sram_hit:
                self.status.sram = Probe.HIT
                self.sram.access(line, is_write)
                c.sram_hits += 1
                if is_write:
                    c.sram_writes += 1
                    self._note_write(line)
                done = t1
                if self.sram_ready:
                    ready = self.sram_ready.get(line)
                    if ready is not None:
                        if ready > t1:
                            done = ready
                        else:
                            del self.sram_ready[line]
                self._finish(req, done, ServedBy.SRAM)
                return RequestDisposition(ServedBy.SRAM, done - req.arrival)

        if in_mshr:
            return self._merge(req, self.mshr.get(line), t1)

        if self.stt is None:
            return self._miss(req, t1)

        self.status.approx = Probe.HIT if stt_positive else Probe.MISS
        if self.nonblocking:
            if not stt_positive:
                # the CBF/tag test is free, the search cycle is still paid
                return self._miss(req, t1 + 1)
            if needs_sync:
                return self._sync_stt(req, now, t1)
            self.tq.enqueue(TagEntry(Cmd.READ, line, ref=req))
            self.status.stt = Probe.BUSY
            self._pend(req)
            return RequestDisposition(ServedBy.PENDING)
        return self._blocking_stt(req, now, t1)

    def _merge(self, req: Request, entry: MshrEntry, t: int) -> RequestDisposition:
        c = self.counters
        c.misses += 1
        self.mshr.merges += 1
        if req.record.is_write:
            entry.dirty = True
            entry.extra_writes += 1
            if entry.installing is not None:
                entry.installing.dirty = True
        if entry.installing is not None:
            # data already arrived and is being written into STT
            self._finish(req, t, ServedBy.FILL)
            return RequestDisposition(ServedBy.FILL, t - req.arrival)
        entry.waiters.append(req)
        self._pend(req)
        return RequestDisposition(ServedBy.PENDING)

    def _allocate(self, req: Request, t: int) -> MshrEntry:
        rec = req.record
        pred = self._classify_pc(rec.pc) if self.predictor is not None else None
        dest = Bank.SRAM if self.sram is not None else Bank.STT
        if self.route_by_prediction and pred is Prediction.WORM:
            dest = Bank.STT
        entry = MshrEntry(rec.line, dest, t, signature(rec.pc), pred, req.rid,
                          dirty=rec.is_write)
        entry.waiters.append(req)
        self.mshr.allocate(entry)
        self.downstream.request(rec.line, False, t, token=entry)
        return entry

    def _miss(self, req: Request, t: int) -> RequestDisposition:
        c = self.counters
        rec = req.record
        if self.bypass and self._classify_pc(rec.pc) is Prediction.WORO:
            c.misses += 1
            c.bypasses += 1
            if rec.is_write:
                self._writeback(rec.line, t)
                self._finish(req, t + 1, ServedBy.DOWNSTREAM)
                return RequestDisposition(ServedBy.DOWNSTREAM, t + 1 - req.arrival)
            self._pend(req)
            self.downstream.request(rec.line, False, t, token=req)
            return RequestDisposition(ServedBy.PENDING)
        self._pend(req)
        if self.mshr.full:
            self.deferred.append((req, t))
        else:
            c.misses += 1
            self._allocate(req, t)
        return RequestDisposition(ServedBy.PENDING)

    def _resolve_miss(self, req: Request, t: int) -> None:
        """A pending request found nothing in STT at ``t``; send it on."""
        line = req.record.line
        if self.sram is not None and self.sram.lookup(line):
            self.sram.access(line, req.record.is_write)
            self.counters.sram_reads += 1
            self.counters.sram_hits += 1
            if req.record.is_write:
                self.counters.sram_writes += 1
                self._note_write(line)
            self._finish_pending(req, t + 1, ServedBy.SRAM)
            return
        entry = self.mshr.get(line)
        if entry is not None:
            self.outstanding -= 1
            self._merge(req, entry, t)
            return
        if self.swap is not None and self.swap.holds(line) and not self.tq.full:
            self.tq.enqueue(TagEntry(Cmd.READ, line, ref=req))
            return
        if self.mshr.full or (self.swap is not None and self.swap.holds(line)):
            self.deferred.append((req, t))
            return
        self.counters.misses += 1
        self._allocate(req, t)

    def _sync_stt(self, req: Request, now: int, t1: int) -> RequestDisposition:
        """Non-blocking mode, STT-positive write or WM read: drain, then search."""
        line = req.record.line
        end, events = self.tq.drain(t1)
        drained_writes = any(ev.entry.cmd is not Cmd.READ for ev in events)
        for ev in events:
            self._on_tq_event(ev)
        res = self.stt.search(line)
        t_search = end + res.search_cycles
        self.tq.free_at = max(self.tq.free_at, t_search + (self.params.stt_read_cyc if res.hit else 0))
        self.stt_free_at = t_search
        self.stt_cause = StallCause.STT_WRITE if drained_writes else StallCause.TAG_SEARCH
        if not res.hit:
            self._pend(req)
            self._resolve_miss(req, t_search)
            return RequestDisposition(ServedBy.PENDING)
        done = t_search + self.params.stt_read_cyc
        self._migrate_to_sram(req, line, done)
        if done > now + 1:
            self.sram_ready[line] = done
        self._finish(req, done, ServedBy.STT)
        return RequestDisposition(ServedBy.STT, done - req.arrival)

    def _migrate_to_sram(self, req: Request, line: int, t: int) -> None:
        c = self.counters
        dirty = self.stt.is_dirty(line) or req.record.is_write
        sig = self._stt_sig(line)
        self.stt.invalidate(line)
        c.stt_hits += 1
        c.migrations_stt_to_sram += 1
        if req.record.is_write:
            self._note_write(line)
        self._sram_fill(line, sig, dirty, t, force=True)

    def _stt_sig(self, line: int) -> int:
        return self.stt.fill_sig_of(line)

    def _blocking_stt(self, req: Request, now: int, t1: int) -> RequestDisposition:
        c = self.counters
        rec = req.record
        line = rec.line
        res = self.stt.search(line)
        t_search = t1 + res.search_cycles
        self.port_cause = StallCause.TAG_SEARCH
        if not res.hit:
            self.status.stt = Probe.MISS
            self.port_free_at = t_search
            return self._miss(req, t_search)
        self.status.stt = Probe.HIT
        wm = self._classify_pc(rec.pc) is Prediction.WM and self.route_by_prediction
        if not rec.is_write and not wm:
            c.stt_hits += 1
            done = t_search + self.params.stt_read_cyc
            self.port_free_at = done
            self._finish(req, done, ServedBy.STT)
            return RequestDisposition(ServedBy.STT, done - req.arrival)
        if self.sram is None:
            # STT-only bank: write in place
            c.stt_hits += 1
            c.stt_in_place_writes += 1
            self.stt.write_in_place(line)
            self._note_write(line)
            done = t_search + self.params.stt_write_cyc
            self.port_free_at = t_search
            self.busy_until = done
            self._finish(req, done, ServedBy.STT)
            return RequestDisposition(ServedBy.STT, done - req.arrival)
        done = t_search + self.params.stt_read_cyc
        self.port_free_at = done
        self._migrate_to_sram(req, line, done)
        self._finish(req, done, ServedBy.STT)
        return RequestDisposition(ServedBy.STT, done - req.arrival)

    # -- fills -------------------------------------------------------------

    def _sram_fill(self, line: int, sig: int, dirty: bool, t: int, force: bool = False) -> bool:
        """Install ``line`` in SRAM at ``t``, dealing with the victim.

        Returns False (and changes nothing) when the victim needs a swap slot
        or tag-queue entry that is not available, unless ``force`` is set.
        """
        c = self.counters
        victim = self.sram.victim_for(line)
        to_stt = victim is not None and self._victim_to_stt(victim)
        if to_stt and self.nonblocking and not force and (self.swap.full or self.tq.full):
            c.fill_blocks += 1
            return False
        self.sram.fill(line, sig, dirty)
        c.sram_writes += 1
        if victim is None:
            return True
        if not to_stt:
            self._leave_l1(victim, t)
            return True
        c.migrations_sram_to_stt += 1
        if self.nonblocking:
            slot = self.swap.put(victim)
            self.tq.waiting.append(TagEntry(Cmd.FILL, victim.line, victim.dirty, victim.fill_sig, ref=slot))
        else:
            self._stt_insert_blocking(victim.line, victim.fill_sig, victim.dirty, t)
        return True

    def _stt_insert_blocking(self, line: int, sig: int, dirty: bool, t: int) -> None:
        evicted = self.stt.insert(line, sig, dirty)
        self.busy_until = max(self.busy_until, t) + self.params.stt_write_cyc
        if evicted is not None:
            self._leave_l1(evicted, t)

    def on_downstream(self, line: int, token: object, now: int) -> None:
        if isinstance(token, Request):
            self._finish_pending(token, now, ServedBy.DOWNSTREAM)
            return
        self.complete_fill(line, now)

    def complete_fill(self, line: int, now: int) -> None:
        """Downstream data for ``line`` arrived; install it when possible."""
        entry = self.mshr.get(line)
        if entry is None or entry.installing is not None:
            raise OrphanFill(f"fill for {line:#x} without a waiting MSHR entry")
        self.pending_fills.append(entry)
        self._service_fills(now)

    def _service_fills(self, now: int) -> None:
        if not self.pending_fills or self.last_fill_cycle >= now:
            return
        if not self.nonblocking and now < self.busy_until:
            return
        entry = self.pending_fills[0]
        if self._install(entry, now):
            self.pending_fills.popleft()
            self.last_fill_cycle = now

    def _install(self, entry: MshrEntry, now: int) -> bool:
        line = entry.line
        done = now + 1
        if entry.destination is Bank.SRAM:
            if not self._sram_fill(line, entry.fill_sig, entry.dirty, now):
                return False
            self.mshr.retire(line)
            self._begin_residency(entry)
        elif self.nonblocking:
            if self.tq.full:
                self.counters.fill_blocks += 1
                return False
            te = TagEntry(Cmd.WRITE, line, entry.dirty, entry.fill_sig, ref=entry)
            self.tq.enqueue(te)
            entry.installing = te
        else:
            self._stt_insert_blocking(line, entry.fill_sig, entry.dirty, now)
            self.mshr.retire(line)
            self._begin_residency(entry)
        for req in entry.waiters:
            self._finish_pending(req, done, ServedBy.FILL)
        entry.waiters.clear()
        return True

    # -- tag queue ---------------------------------------------------------

    def _on_tq_event(self, ev: CompletionEvent) -> None:
        entry = ev.entry
        if entry.cmd is Cmd.READ:
            req = entry.ref
            if ev.hit:
                self.counters.stt_hits += 1
                self._finish_pending(req, ev.finish, ServedBy.STT)
            else:
                self._resolve_miss(req, ev.finish)
            return
        if ev.evicted is not None:
            self._leave_l1(ev.evicted, ev.finish)
        if entry.cmd is Cmd.FILL:
            self.swap.release(entry.ref)
        else:
            mentry: MshrEntry = entry.ref
            self.mshr.retire(mentry.line)
            self._begin_residency(mentry)

    def tick(self, now: int) -> None:
        if self.tq is not None:
            for ev in self.tq.tick(now):
                self._on_tq_event(ev)
        self._service_fills(now)
        while self.deferred:
            req, ready = self.deferred[0]
            line = req.record.line
            if line not in self.mshr and self.mshr.full:
                break
            if self.swap is not None and self.swap.holds(line):
                break
            self.deferred.popleft()
            self._resolve_miss(req, max(now, ready))

    # -- invariants --------------------------------------------------------

    def resident_sets(self) -> tuple[set[int], set[int], list[int]]:
        sram = self.sram.line_set() if self.sram is not None else set()
        stt = self.stt.line_set() if self.stt is not None else set()
        swap = self.swap.lines() if self.swap is not None else []
        return sram, stt, swap

    def check_single_copy(self) -> bool:
        sram, stt, swap = self.resident_sets()
        # each structure holds distinct lines, so overlaps show up as a short union
        stt_count = self.stt.occupancy if self.stt is not None else 0
        sram_count = self.sram.occupancy if self.sram is not None else 0
        if len(sram) != sram_count or len(stt) != stt_count or len(set(swap)) != len(swap):
            return False
        total = len(sram) + len(stt) + len(swap)
        sram |= stt
        sram.update(swap)
        return len(sram) == total

    def check_swap_pairing(self) -> bool:
        if self.swap is None:
            return True
        f_refs = [e.ref for e in self.tq.entries() if e.cmd is Cmd.FILL]
        if len(f_refs) != len(self.swap.slots):
            return False
        return all(any(r is s for r in f_refs) for s in self.swap.slots)
