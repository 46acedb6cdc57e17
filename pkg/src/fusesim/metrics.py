"""Run statistics, energy accounting, predictor scoring and serialization."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, fields
from typing import Iterable, NamedTuple

from .geometry import TimingEnergyParams
from .predictor import Prediction

STALL_CAUSES = ("stt_write", "tag_search", "tag_queue_full", "swap_full", "mshr_full")


class EnergyBreakdown(NamedTuple):
    sram_dynamic: float
    stt_dynamic: float
    leakage: float
    total: float


def energy(sram_reads: int, sram_writes: int, stt_reads: int, stt_writes: int,
           params: TimingEnergyParams, total_cycles: int) -> EnergyBreakdown:
    """Energy in nJ from access counts and run length.

    Leakage is ``(P_sram + P_stt)`` mW held for ``total_cycles / clock_hz``
    seconds; 1 mW for 1 s is 1e6 nJ.
    """
    sram = sram_reads * params.sram_read_nj + sram_writes * params.sram_write_nj
    stt = stt_reads * params.stt_read_nj + stt_writes * params.stt_write_nj
    leak = (params.sram_leak_mw + params.stt_leak_mw) * total_cycles / params.clock_hz * 1e6
    return EnergyBreakdown(sram, stt, leak, sram + stt + leak)


class PredictionTally(NamedTuple):
    true: int
    false: int
    neutral: int

    @property
    def accuracy(self) -> float:
        n = self.true + self.false + self.neutral
        return self.true / n if n else 0.0


def judge(prediction: Prediction, writes: int) -> bool | None:
    """True/False for a residency with ``writes`` writes; None for Neutral."""
    if prediction is Prediction.NEUTRAL:
        return None
    if prediction is Prediction.WM:
        return writes >= 2
    return writes <= 1


def score_predictions(log: Iterable[tuple[Prediction, int]]) -> PredictionTally:
    """Tally ``(prediction, writes during residency)`` pairs.

    WM is right when the line saw multiple writes before eviction; WORM and
    WORO are right when it saw a single write.
    """
    t = f = n = 0
    for pred, writes in log:
        verdict = judge(pred, writes)
        if verdict is None:
            n += 1
        elif verdict:
            t += 1
        else:
            f += 1
    return PredictionTally(t, f, n)


@dataclass
class SimReport:
    """Flat per-run record.  Ratio fields are derived from the counters."""

    preset: str = ""
    accesses: int = 0
    sram_hits: int = 0
    stt_hits: int = 0
    misses: int = 0
    miss_rate: float = 0.0
    mshr_allocations: int = 0
    mshr_merges: int = 0
    bypasses: int = 0
    stall_stt_write: int = 0
    stall_tag_search: int = 0
    stall_tag_queue_full: int = 0
    stall_swap_full: int = 0
    stall_mshr_full: int = 0
    stall_total: int = 0
    stt_stall_cycles: int = 0
    tag_queue_flushes: int = 0
    flush_fraction: float = 0.0
    stt_searches: int = 0
    search_cycles_total: int = 0
    mean_search_cycles: float = 0.0
    cbf_tests: int = 0
    cbf_positives: int = 0
    cbf_false_positives: int = 0
    fp_rate: float = 0.0
    pred_true: int = 0
    pred_false: int = 0
    pred_neutral: int = 0
    pred_accuracy: float = 0.0
    migrations_sram_to_stt: int = 0
    migrations_stt_to_sram: int = 0
    offchip_requests: int = 0
    writebacks: int = 0
    sram_reads: int = 0
    sram_writes: int = 0
    stt_reads: int = 0
    stt_writes: int = 0
    latency_sum: int = 0
    amat_cycles: float = 0.0
    total_cycles: int = 0
    energy_sram_dynamic_nj: float = 0.0
    energy_stt_dynamic_nj: float = 0.0
    energy_leakage_nj: float = 0.0
    energy_total_nj: float = 0.0

    _DERIVED = frozenset({
        "miss_rate", "stall_total", "stt_stall_cycles", "flush_fraction", "mean_search_cycles",
        "fp_rate", "pred_accuracy", "amat_cycles", "energy_total_nj",
    })

    def finalize(self) -> "SimReport":
        """Recompute the derived fields from the counters (in place)."""
        a = self.accesses
        self.miss_rate = self.misses / a if a else 0.0
        self.stall_total = (self.stall_stt_write + self.stall_tag_search + self.stall_tag_queue_full
                            + self.stall_swap_full + self.stall_mshr_full)
        self.stt_stall_cycles = self.stall_total - self.stall_mshr_full
        self.flush_fraction = self.tag_queue_flushes / a if a else 0.0
        self.mean_search_cycles = self.search_cycles_total / self.stt_searches if self.stt_searches else 0.0
        self.fp_rate = self.cbf_false_positives / self.cbf_tests if self.cbf_tests else 0.0
        self.pred_accuracy = PredictionTally(self.pred_true, self.pred_false, self.pred_neutral).accuracy
        self.amat_cycles = self.latency_sum / a if a else 0.0
        self.energy_total_nj = self.energy_sram_dynamic_nj + self.energy_stt_dynamic_nj + self.energy_leakage_nj
        return self

    def stall(self, cause: str) -> int:
        return getattr(self, f"stall_{cause}")

    @property
    def predictions(self) -> PredictionTally:
        return PredictionTally(self.pred_true, self.pred_false, self.pred_neutral)

    @property
    def energy(self) -> EnergyBreakdown:
        return EnergyBreakdown(self.energy_sram_dynamic_nj, self.energy_stt_dynamic_nj,
                               self.energy_leakage_nj, self.energy_total_nj)

    def __add__(self, other: "SimReport") -> "SimReport":
        """Combine two runs of the same configuration by summing counters."""
        if not isinstance(other, SimReport):
            return NotImplemented
        if self.preset != other.preset:
            raise ValueError(f"cannot add reports of {self.preset!r} and {other.preset!r}")
        out = SimReport(preset=self.preset)
        for f in fields(self):
            if f.name == "preset" or f.name in self._DERIVED:
                continue
            setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        return out.finalize()

    # -- serialization -----------------------------------------------------

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimReport":
        kwargs = {}
        for f in fields(cls):
            if f.name not in data:
                raise ValueError(f"missing report field {f.name!r}")
            raw = data[f.name]
            if f.type == "str":
                kwargs[f.name] = str(raw)
            elif f.type == "int":
                kwargs[f.name] = int(raw)
            else:
                kwargs[f.name] = float(raw)
        return cls(**kwargs)


def serialize(reports: SimReport | list[SimReport], fmt: str = "json") -> bytes:
    """CSV (header + one row per report) or JSON (object, or list of objects)."""
    single = isinstance(reports, SimReport)
    rows = [reports] if single else list(reports)
    if fmt == "json":
        payload = rows[0].to_dict() if single else [r.to_dict() for r in rows]
        return (json.dumps(payload, indent=2) + "\n").encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SimReport.field_names())
        for r in rows:
            w.writerow([_csv_value(v) for v in r.to_dict().values()])
        return buf.getvalue().encode()
    raise ValueError(f"unknown format {fmt!r}")


def _csv_value(v):
    return repr(v) if isinstance(v, float) else v


def deserialize(data: bytes, fmt: str = "json") -> list[SimReport]:
    text = data.decode()
    if fmt == "json":
        payload = json.loads(text)
        items = payload if isinstance(payload, list) else [payload]
        return [SimReport.from_dict(d) for d in items]
    if fmt == "csv":
        return [SimReport.from_dict(row) for row in csv.DictReader(io.StringIO(text))]
    raise ValueError(f"unknown format {fmt!r}")
