"""Memory-reference traces: parsing, synthetic generation and read-level labels.

Trace files are line-oriented text, one reference per line::

    # cycle,warp_id,pc_hex,addr_hex,R|W
    0,0,0x400,0x1000,R
    5,3,0x404,0x2080,W

Every reference is attributed to a 128-byte line (``addr >> 7``).
"""
from __future__ import annotations

import enum
import io
import random
from collections import Counter
from dataclasses import dataclass, fields
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

LINE_SHIFT = 7
LINE_BYTES = 1 << LINE_SHIFT
DEFAULT_WARPS = 48
ADDR_MASK = 0xFFFFFFFF


class Op(enum.Enum):
    READ = "R"
    WRITE = "W"


class TraceRecord(NamedTuple):
    cycle: int
    warp_id: int
    pc: int
    addr: int
    op: Op

    @property
    def line(self) -> int:
        return self.addr >> LINE_SHIFT

    @property
    def is_write(self) -> bool:
        return self.op is Op.WRITE


class ReadLevel(enum.Enum):
    """Ground-truth read-level class of a line over a whole trace."""

    WM = "WM"
    READ_INTENSIVE = "ReadIntensive"
    WORM = "WORM"
    WORO = "WORO"


class MalformedLine(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class InvalidMix(ValueError):
    pass


# ---------------------------------------------------------------------------
# parsing / writing


def _parse_int(text: str, base: int, line_no: int, what: str) -> int:
    try:
        value = int(text, base)
    except ValueError:
        raise MalformedLine(line_no, f"bad {what} {text!r}") from None
    if value < 0:
        raise MalformedLine(line_no, f"negative {what} {text!r}")
    return value


def parse_trace(stream: Iterable[str | bytes], warps: int = DEFAULT_WARPS) -> list[TraceRecord]:
    """Parse ``cycle,warp_id,pc_hex,addr_hex,R|W`` lines.

    ``stream`` may be a text or binary file object, or any iterable of lines.
    Blank lines and ``#`` comments are skipped.  Raises :class:`MalformedLine`
    carrying the 1-based line number of the first bad record.
    """
    records: list[TraceRecord] = []
    last_cycle = 0
    for line_no, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("ascii")
            except UnicodeDecodeError:
                raise MalformedLine(line_no, "non-ascii content") from None
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 5:
            raise MalformedLine(line_no, f"expected 5 fields, got {len(parts)}")
        cycle = _parse_int(parts[0], 10, line_no, "cycle")
        warp = _parse_int(parts[1], 10, line_no, "warp id")
        pc = _parse_int(parts[2], 16, line_no, "pc")
        addr = _parse_int(parts[3], 16, line_no, "address")
        if pc > ADDR_MASK or addr > ADDR_MASK:
            raise MalformedLine(line_no, "value exceeds 32 bits")
        if warp >= warps:
            raise MalformedLine(line_no, f"warp id {warp} >= {warps}")
        try:
            op = Op(parts[4].upper())
        except ValueError:
            raise MalformedLine(line_no, f"unknown op {parts[4]!r}") from None
        if cycle < last_cycle:
            raise MalformedLine(line_no, f"cycle {cycle} goes backwards")
        last_cycle = cycle
        records.append(TraceRecord(cycle, warp, pc, addr, op))
    return records


def read_trace(path: str, warps: int = DEFAULT_WARPS) -> list[TraceRecord]:
    with open(path, "rb") as fh:
        return parse_trace(fh, warps=warps)


def format_record(rec: TraceRecord) -> str:
    return f"{rec.cycle},{rec.warp_id},{rec.pc:#x},{rec.addr:#x},{rec.op.value}"


def write_trace(records: Iterable[TraceRecord], stream: IO[str]) -> None:
    stream.write("# cycle,warp_id,pc_hex,addr_hex,R|W\n")
    for rec in records:
        stream.write(format_record(rec))
        stream.write("\n")


def dumps_trace(records: Iterable[TraceRecord]) -> str:
    buf = io.StringIO()
    write_trace(records, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# ground-truth labels


def classify_counts(writes: int, reads: int, read_intensive_factor: int = 4) -> ReadLevel:
    """Label one line from its total write and read counts.

    A line that is never written is treated as if its first reference were
    the (fill) write, so a read-only line is WORO or WORM.
    """
    if writes == 0:
        writes, reads = 1, reads - 1
    if writes == 1:
        return ReadLevel.WORO if reads == 0 else ReadLevel.WORM
    if reads >= writes * read_intensive_factor:
        return ReadLevel.READ_INTENSIVE
    return ReadLevel.WM


def label_trace(records: Iterable[TraceRecord], read_intensive_factor: int = 4) -> dict[int, ReadLevel]:
    """Map each touched line address (``addr >> 7``) to its read-level label."""
    writes: Counter[int] = Counter()
    reads: Counter[int] = Counter()
    for rec in records:
        if rec.op is Op.WRITE:
            writes[rec.line] += 1
        else:
            reads[rec.line] += 1
    lines = set(writes) | set(reads)
    return {ln: classify_counts(writes[ln], reads[ln], read_intensive_factor) for ln in lines}


def label_fractions(labels: Mapping[int, ReadLevel]) -> dict[ReadLevel, float]:
    total = len(labels)
    counts = Counter(labels.values())
    return {lvl: (counts[lvl] / total if total else 0.0) for lvl in ReadLevel}


# ---------------------------------------------------------------------------
# synthetic generation

_CLASS_ORDER = (ReadLevel.WM, ReadLevel.READ_INTENSIVE, ReadLevel.WORM, ReadLevel.WORO)


@dataclass(frozen=True)
class MixSpec:
    """Knobs for :func:`generate_synthetic`.

    ``window`` is the number of lines live at once; it sets the typical reuse
    distance (a live line is revisited roughly every ``window`` references).
    ``wm_write_share`` is the chance that an extra reference to a WM line is a
    write (reads are also capped so the line stays below the read-intensive
    boundary).  ``gap`` is the number of cycles between consecutive
    references; 1 means one memory reference every cycle.
    """

    wm: float = 0.0
    read_intensive: float = 0.0
    worm: float = 1.0
    woro: float = 0.0
    pool: int = 1000
    refs: int = 10000
    window: int = 64
    warps: int = DEFAULT_WARPS
    pcs_per_class: int = 2
    read_intensive_factor: int = 4
    base_addr: int = 0x01000000
    wm_write_share: float = 0.5
    gap: int = 1

    def fractions(self) -> dict[ReadLevel, float]:
        return {
            ReadLevel.WM: self.wm,
            ReadLevel.READ_INTENSIVE: self.read_intensive,
            ReadLevel.WORM: self.worm,
            ReadLevel.WORO: self.woro,
        }

    def validate(self) -> None:
        fr = self.fractions()
        if any(v < 0 for v in fr.values()):
            raise InvalidMix(f"negative class fraction in {fr}")
        if abs(sum(fr.values()) - 1.0) > 1e-9:
            raise InvalidMix(f"class fractions sum to {sum(fr.values())!r}, not 1")
        if self.pool <= 0 or self.refs < 0 or self.window <= 0:
            raise InvalidMix("pool and window must be positive, refs non-negative")
        if not 0 < self.warps <= DEFAULT_WARPS:
            raise InvalidMix(f"warps must be in 1..{DEFAULT_WARPS}")
        if self.pcs_per_class <= 0 or 4 * 2 * self.pcs_per_class > 512:
            raise InvalidMix("pcs_per_class must give distinct 9-bit signatures")
        if self.pool > 1 << 15:
            raise InvalidMix("pool larger than the 15-bit sampler tag space")
        if self.gap <= 0:
            raise InvalidMix("gap must be positive")
        if not 0 <= self.wm_write_share <= 1:
            raise InvalidMix("wm_write_share must lie in [0, 1]")

    @classmethod
    def from_mapping(cls, values: Mapping[str, str | float | int]) -> "MixSpec":
        known = {f.name: f.type for f in fields(cls)}
        kwargs: dict[str, float | int] = {}
        for key, raw in values.items():
            key = key.strip()
            if key not in known:
                raise InvalidMix(f"unknown mix key {key!r}")
            text = str(raw).strip()
            if known[key] == "float":
                kwargs[key] = float(text)
            else:
                kwargs[key] = int(text, 0)
        spec = cls(**kwargs)
        spec.validate()
        return spec


def parse_mix(text: str) -> MixSpec:
    """Read a MixSpec from ``key=value`` lines (``#`` comments allowed)."""
    values: dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidMix(f"line {line_no}: expected key=value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return MixSpec.from_mapping(values)


def load_mix(path: str) -> MixSpec:
    with open(path) as fh:
        return parse_mix(fh.read())


def _apportion(total: int, fractions: Sequence[float]) -> list[int]:
    """Largest-remainder rounding of ``fractions * total`` to integers."""
    raw = [f * total for f in fractions]
    counts = [int(r) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (counts[i] - raw[i], i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


class _LinePlan:
    __slots__ = ("line", "cls", "writes", "reads", "warp", "wpc", "rpc", "ops")

    def __init__(self, line: int, cls: ReadLevel, writes: int, reads: int):
        self.line = line
        self.cls = cls
        self.writes = writes
        self.reads = reads


def _minimum(cls: ReadLevel, factor: int) -> tuple[int, int]:
    if cls is ReadLevel.WORO:
        return 1, 0
    if cls is ReadLevel.WORM:
        return 1, 1
    if cls is ReadLevel.READ_INTENSIVE:
        return 2, 2 * factor
    return 2, 0


def _add_ref(plan: _LinePlan, factor: int, write_share: float, rng: random.Random) -> None:
    if plan.cls is ReadLevel.WORM:
        plan.reads += 1
    elif plan.cls is ReadLevel.READ_INTENSIVE:
        plan.reads += 1
    elif plan.reads + 1 < plan.writes * factor and rng.random() >= write_share:
        plan.reads += 1
    else:
        plan.writes += 1


def _op_sequence(plan: _LinePlan, rng: random.Random) -> list[Op]:
    # first reference is always the write that brings the line in
    rest = [Op.WRITE] * (plan.writes - 1) + [Op.READ] * plan.reads
    rng.shuffle(rest)
    return [Op.WRITE] + rest


def generate_synthetic(spec: MixSpec, seed: int) -> list[TraceRecord]:
    """Generate a trace whose per-line labels follow ``spec`` exactly.

    Each line gets one class, an owner warp, and one write PC plus one read
    PC drawn from PCs reserved for that class, so every PC emits a single
    behaviour.  Lines are streamed through a live window of ``spec.window``
    lines; each step picks a live line uniformly and emits its next access.
    """
    spec.validate()
    rng = random.Random(seed)
    factor = spec.read_intensive_factor
    counts = _apportion(spec.pool, [spec.fractions()[c] for c in _CLASS_ORDER])

    classes: list[ReadLevel] = []
    for cls, n in zip(_CLASS_ORDER, counts):
        classes.extend([cls] * n)
    rng.shuffle(classes)

    base_line = spec.base_addr >> LINE_SHIFT
    plans = [_LinePlan(base_line + i, cls, *_minimum(cls, factor)) for i, cls in enumerate(classes)]
    minimum = sum(p.writes + p.reads for p in plans)
    if spec.refs < minimum:
        raise InvalidMix(f"refs={spec.refs} below the {minimum} references this mix needs")
    growable = [p for p in plans if p.cls is not ReadLevel.WORO]
    extra = spec.refs - minimum
    if extra and not growable:
        raise InvalidMix("a pure WORO mix needs refs == pool")
    for _ in range(extra):
        _add_ref(rng.choice(growable), factor, spec.wm_write_share, rng)

    pcs: dict[ReadLevel, tuple[list[int], list[int]]] = {}
    k = 0
    for cls in _CLASS_ORDER:
        wpcs = [0x1000 + 4 * (k + j) for j in range(spec.pcs_per_class)]
        k += spec.pcs_per_class
        rpcs = [0x1000 + 4 * (k + j) for j in range(spec.pcs_per_class)]
        k += spec.pcs_per_class
        pcs[cls] = (wpcs, rpcs)

    for plan in plans:
        plan.warp = rng.randrange(spec.warps)
        wpcs, rpcs = pcs[plan.cls]
        plan.wpc = rng.choice(wpcs)
        plan.rpc = rng.choice(rpcs)
        plan.ops = _op_sequence(plan, rng)

    order = list(plans)
    rng.shuffle(order)
    pending = iter(order)
    live: list[_LinePlan] = []
    cursors: dict[int, int] = {}
    for plan in pending:
        live.append(plan)
        cursors[plan.line] = 0
        if len(live) >= spec.window:
            break

    out: list[TraceRecord] = []
    while live:
        i = rng.randrange(len(live))
        plan = live[i]
        pos = cursors[plan.line]
        op = plan.ops[pos]
        pc = plan.wpc if op is Op.WRITE else plan.rpc
        out.append(TraceRecord(len(out) * spec.gap, plan.warp, pc, plan.line << LINE_SHIFT, op))
        if pos + 1 == len(plan.ops):
            del cursors[plan.line]
            nxt = next(pending, None)
            if nxt is None:
                live[i] = live[-1]
                live.pop()
            else:
                live[i] = nxt
                cursors[nxt.line] = 0
        else:
            cursors[plan.line] = pos + 1
    return out
