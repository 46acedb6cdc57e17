"""Cycle loop: issues trace records in order, delivers downstream fills, ticks
the controller, and accounts stalls and per-request latency.

Idle stretches are skipped by jumping to the next cycle at which anything can
change, so a 220-cycle DRAM wait costs one loop iteration.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

from .controller import Controller, ControllerConfig, Request, StallCause
from .downstream import Downstream, DownstreamConfig
from .geometry import ConfigPreset, TimingEnergyParams, preset as lookup_preset, ratio_preset
from .metrics import SimReport, energy, score_predictions
from .trace import TraceRecord


class InvariantViolation(AssertionError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimParams:
    downstream: DownstreamConfig = field(default_factory=DownstreamConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    issue_width: int = 1
    warmup_fraction: float = 0.1
    check_invariants: bool = False
    latency_log: bool = False
    replays: int = 1

    def __post_init__(self) -> None:
        if self.issue_width <= 0:
            raise ConfigError("issue_width must be positive")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in [0, 1)")
        if self.replays <= 0:
            raise ConfigError("replays must be positive")


class LatencyRecord(NamedTuple):
    rid: int
    arrival: int
    done: int
    served_by: str


class Simulation:
    """One run of one trace on one configuration."""

    def __init__(self, trace: Sequence[TraceRecord], preset: ConfigPreset | str,
                 params: SimParams | None = None):
        self.trace = trace
        self.preset = lookup_preset(preset) if isinstance(preset, str) else preset
        self.params = params or SimParams()
        self.downstream = Downstream(self.params.downstream)
        warm = math.ceil(len(trace) * self.params.warmup_fraction)
        self.controller = Controller(self.preset, self.downstream, self.params.controller, warmup_rid=warm)
        self.controller.keep_requests = self.params.latency_log
        self.stalls: Counter[StallCause] = Counter()
        self.now = 0
        self.events = 0

    def _check(self) -> None:
        ctrl = self.controller
        if not ctrl.check_single_copy():
            raise InvariantViolation(f"line held in two places at cycle {self.now}")
        if not ctrl.check_swap_pairing():
            raise InvariantViolation(f"swap buffer and tag queue disagree at cycle {self.now}")

    def run(self) -> SimReport:
        trace = self.trace
        ctrl = self.controller
        ds = self.downstream
        width = self.params.issue_width
        check = self.params.check_invariants
        n = len(trace)
        i = 0
        head_since = 0
        now = 0
        while n:
            for line, token in ds.pop_ready(now):
                ctrl.on_downstream(line, token, now)
            ctrl.tick(now)
            cause = None
            issued = 0
            while i < n and issued < width and trace[i].cycle <= now:
                cause = ctrl.blocked_cause(now)
                if cause is not None:
                    break
                rec = trace[i]
                disp = ctrl.handle(Request(i, rec, max(rec.cycle, head_since)), now)
                if disp.stall is not None:
                    cause = disp.stall
                    break
                i += 1
                issued += 1
                head_since = now + 1 if issued == width else now
            self.events += 1
            if check:
                self._check()
            if i == n and ctrl.idle():
                break

            cands = []
            nxt_ev = ctrl.next_event(now)
            if nxt_ev is not None:
                cands.append(nxt_ev)
            if i < n:
                if trace[i].cycle > now:
                    cands.append(trace[i].cycle)
                elif cause is None:
                    cands.append(now + 1)
                else:
                    unblock = ctrl.unblock_time(now)
                    if unblock is not None:
                        cands.append(unblock)
            if not cands:
                raise RuntimeError(f"simulation stuck at cycle {now}")
            nxt = max(min(cands), now + 1)
            if cause is not None:
                self.stalls[cause] += nxt - now
            now = nxt
        self.now = now
        return self._report()

    def latency_log(self) -> list[LatencyRecord]:
        return [LatencyRecord(r.rid, r.arrival, r.done, r.served_by.value)
                for r in sorted(self.controller.completed, key=lambda r: r.rid)]

    def _report(self) -> SimReport:
        ctrl = self.controller
        c = ctrl.counters
        ds = self.downstream
        stt = ctrl.stt
        total = ctrl.last_done
        if ctrl.tq is not None:
            total = max(total, ctrl.tq.free_at)
        total = max(total, ctrl.busy_until if len(self.trace) else 0)
        ctrl.close_residencies()
        tally = score_predictions(ctrl.prediction_log)
        stt_reads = stt.stats.searches if stt is not None else 0
        stt_writes = (stt.stats.inserts + c.stt_in_place_writes) if stt is not None else 0
        e = energy(c.sram_reads, c.sram_writes, stt_reads, stt_writes, self.preset.params, total)
        r = SimReport(
            preset=self.preset.name,
            accesses=c.accesses,
            sram_hits=c.sram_hits,
            stt_hits=c.stt_hits,
            misses=c.misses,
            mshr_allocations=ctrl.mshr.allocations,
            mshr_merges=ctrl.mshr.merges,
            bypasses=c.bypasses,
            stall_stt_write=self.stalls[StallCause.STT_WRITE],
            stall_tag_search=self.stalls[StallCause.TAG_SEARCH],
            stall_tag_queue_full=self.stalls[StallCause.TAG_QUEUE_FULL],
            stall_swap_full=self.stalls[StallCause.SWAP_FULL],
            stall_mshr_full=self.stalls[StallCause.MSHR_FULL],
            tag_queue_flushes=ctrl.tq.flushes if ctrl.tq is not None else 0,
            stt_searches=stt.stats.searches if stt is not None else 0,
            search_cycles_total=stt.stats.search_cycles if stt is not None else 0,
            pred_true=tally.true,
            pred_false=tally.false,
            pred_neutral=tally.neutral,
            migrations_sram_to_stt=c.migrations_sram_to_stt,
            migrations_stt_to_sram=c.migrations_stt_to_sram,
            offchip_requests=ds.requests,
            writebacks=ds.writebacks,
            sram_reads=c.sram_reads,
            sram_writes=c.sram_writes,
            stt_reads=stt_reads,
            stt_writes=stt_writes,
            latency_sum=ctrl.latency_sum,
            total_cycles=total,
            energy_sram_dynamic_nj=e.sram_dynamic,
            energy_stt_dynamic_nj=e.stt_dynamic,
            energy_leakage_nj=e.leakage,
        )
        if stt is not None and stt.filters is not None:
            fs = stt.filters.stats
            r.cbf_tests = fs.tests
            r.cbf_positives = fs.positives
            r.cbf_false_positives = fs.false_positives
        return r.finalize()


def run(trace: Sequence[TraceRecord], preset: ConfigPreset | str, params: SimParams | None = None) -> SimReport:
    """Simulate ``trace`` on ``preset``.

    With ``params.replays > 1`` the trace is run that many times, each from a
    cold cache, and the reports are summed.
    """
    params = params or SimParams()
    report = None
    for _ in range(params.replays):
        r = Simulation(trace, preset, params).run()
        report = r if report is None else report + r
    return report


# ---------------------------------------------------------------------------
# dotted-key overrides


def _coerce(value: str, current):
    if isinstance(current, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if isinstance(current, int):
        return int(value, 0)
    if isinstance(current, float):
        return float(value)
    return value


def _set_field(obj, name: str, value: str, section: str):
    known = {f.name for f in fields(obj)}
    if name not in known:
        raise ConfigError(f"unknown setting {section}.{name}")
    try:
        return replace(obj, **{name: _coerce(value, getattr(obj, name))})
    except ValueError as exc:
        raise ConfigError(f"{section}.{name}: {exc}") from None


def apply_overrides(preset: ConfigPreset, params: SimParams,
                    overrides: Mapping[str, str]) -> tuple[ConfigPreset, SimParams]:
    """Apply ``section.field=value`` settings.

    Sections: ``downstream``, ``controller``, ``timing`` (latencies and
    energies of the preset), ``engine`` (SimParams scalars) and
    ``geometry.sram_ratio`` (rebuild the preset at another SRAM:STT split).
    """
    for key, value in overrides.items():
        section, _, name = key.strip().partition(".")
        value = str(value).strip()
        if not name:
            raise ConfigError(f"override {key!r} needs a section, e.g. downstream.{key}")
        if section == "downstream":
            params = replace(params, downstream=_set_field(params.downstream, name, value, section))
        elif section == "controller":
            params = replace(params, controller=_set_field(params.controller, name, value, section))
        elif section == "timing":
            preset = replace(preset, params=_set_field(preset.params, name, value, section))
        elif section == "engine":
            if name in ("downstream", "controller"):
                raise ConfigError(f"use the {name}. section")
            params = _set_field(params, name, value, section)
        elif section == "geometry" and name == "sram_ratio":
            try:
                frac = Fraction(value)
            except ValueError:
                raise ConfigError(f"bad ratio {value!r}") from None
            try:
                preset = replace(ratio_preset(frac, preset.name), params=preset.params)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        else:
            raise ConfigError(f"unknown setting {key!r}")
    return preset, params


def parse_config(text: str) -> dict[str, str]:
    """``section.key = value`` lines, or ``[section]`` headers with ``key = value``."""
    out: dict[str, str] = {}
    section = ""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line_no}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[f"{section}.{key}" if section and "." not in key else key] = value
    return out


__all__ = [
    "ConfigError", "InvariantViolation", "LatencyRecord", "SimParams", "Simulation",
    "TimingEnergyParams", "apply_overrides", "parse_config", "run",
]
