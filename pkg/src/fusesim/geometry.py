"""Address decomposition and the named L1D configurations.

Capacities, geometries, latencies and energies come from the evaluated
GPU configuration table (32KB-SRAM-equivalent area budget, STT-MRAM taken
as 4x denser than SRAM).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction

LINE_BYTES = 128
OFFSET_BITS = 7
ADDR_BITS = 32
STT_DENSITY = 4
AREA_BUDGET_BYTES = 32 * 1024


class UnknownPreset(KeyError):
    pass


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class CacheGeometry:
    sets: int
    ways: int
    line_bytes: int = LINE_BYTES

    def __post_init__(self) -> None:
        if not _is_pow2(self.sets):
            raise ValueError(f"sets must be a power of two, got {self.sets}")
        if self.ways <= 0:
            raise ValueError(f"ways must be positive, got {self.ways}")
        if self.line_bytes != LINE_BYTES:
            raise ValueError("only 128-byte lines are modelled")

    @property
    def lines(self) -> int:
        return self.sets * self.ways

    @property
    def capacity_bytes(self) -> int:
        return self.sets * self.ways * self.line_bytes

    @property
    def offset_bits(self) -> int:
        return OFFSET_BITS

    @property
    def index_bits(self) -> int:
        return self.sets.bit_length() - 1

    @property
    def tag_bits(self) -> int:
        return ADDR_BITS - self.index_bits - OFFSET_BITS

    @classmethod
    def from_capacity(cls, capacity_bytes: int, ways: int | None = None) -> "CacheGeometry":
        """Pick a geometry for ``capacity_bytes``.

        With ``ways`` given, sets follow from the capacity.  Otherwise the
        smallest way count >= 2 that leaves a power-of-two set count is used.
        """
        lines, rem = divmod(capacity_bytes, LINE_BYTES)
        if rem or lines <= 0:
            raise ValueError(f"capacity {capacity_bytes} is not a positive number of lines")
        if ways is not None:
            if lines % ways:
                raise ValueError(f"{lines} lines do not split into {ways} ways")
            return cls(lines // ways, ways)
        for w in range(min(2, lines), lines + 1):
            if lines % w == 0 and _is_pow2(lines // w):
                return cls(lines // w, w)
        raise ValueError(f"no power-of-two geometry for {lines} lines")


def decompose(addr: int, geom: CacheGeometry) -> tuple[int, int, int]:
    """Split a 32-bit byte address into ``(tag, set_index, offset)``."""
    offset = addr & (LINE_BYTES - 1)
    set_index = (addr >> OFFSET_BITS) & (geom.sets - 1)
    tag = addr >> (OFFSET_BITS + geom.index_bits)
    return tag, set_index, offset


def recompose(tag: int, set_index: int, offset: int, geom: CacheGeometry) -> int:
    return (((tag << geom.index_bits) | set_index) << OFFSET_BITS) | offset


@dataclass(frozen=True)
class TimingEnergyParams:
    sram_read_cyc: int = 1
    sram_write_cyc: int = 1
    stt_read_cyc: int = 1
    stt_write_cyc: int = 5
    sram_read_nj: float = 0.09
    sram_write_nj: float = 0.07
    stt_read_nj: float = 0.26
    stt_write_nj: float = 2.4
    sram_leak_mw: float = 36.0
    stt_leak_mw: float = 2.4
    clock_hz: float = 700e6

    def __post_init__(self) -> None:
        for f in ("sram_read_cyc", "sram_write_cyc", "stt_read_cyc", "stt_write_cyc", "clock_hz"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")
        for f in ("sram_read_nj", "sram_write_nj", "stt_read_nj", "stt_write_nj", "sram_leak_mw", "stt_leak_mw"):
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be non-negative")


@dataclass(frozen=True)
class Features:
    swap_buffer: bool = False
    tag_queue: bool = False
    approx_fa: bool = False
    predictor: bool = False
    deadwrite_bypass: bool = False

    @property
    def non_blocking(self) -> bool:
        return self.swap_buffer and self.tag_queue


@dataclass(frozen=True)
class ConfigPreset:
    name: str
    sram_geom: CacheGeometry | None
    stt_geom: CacheGeometry | None
    features: Features = field(default_factory=Features)
    params: TimingEnergyParams = field(default_factory=TimingEnergyParams)

    @property
    def sram_bytes(self) -> int:
        return self.sram_geom.capacity_bytes if self.sram_geom else 0

    @property
    def stt_bytes(self) -> int:
        return self.stt_geom.capacity_bytes if self.stt_geom else 0

    @property
    def area_bytes(self) -> float:
        """SRAM-equivalent area: STT-MRAM counts at a quarter of its capacity."""
        return self.sram_bytes + self.stt_bytes / STT_DENSITY


# per-configuration energy/leakage columns of the configuration table
_L1_SRAM_ENERGY = TimingEnergyParams(
    sram_read_nj=0.15, sram_write_nj=0.12, stt_read_nj=0.0, stt_write_nj=0.0,
    sram_leak_mw=58.0, stt_leak_mw=0.0,
)
_BY_NVM_ENERGY = TimingEnergyParams(
    sram_read_nj=0.0, sram_write_nj=0.0, stt_read_nj=1.2, stt_write_nj=2.9,
    sram_leak_mw=0.0, stt_leak_mw=2.8,
)
_HYBRID_ENERGY = TimingEnergyParams(stt_leak_mw=2.6)
_FA_ENERGY = TimingEnergyParams(stt_leak_mw=2.4)

PRESET_NAMES = ("L1-SRAM", "FA-SRAM", "By-NVM", "Hybrid", "Base-FUSE", "FA-FUSE", "Dy-FUSE")


def _build_presets() -> dict[str, ConfigPreset]:
    sram_64x2 = CacheGeometry(64, 2)
    return {
        "L1-SRAM": ConfigPreset("L1-SRAM", CacheGeometry(64, 4), None, Features(), _L1_SRAM_ENERGY),
        "FA-SRAM": ConfigPreset("FA-SRAM", CacheGeometry(1, 256), None, Features(), _L1_SRAM_ENERGY),
        "By-NVM": ConfigPreset(
            "By-NVM", None, CacheGeometry(256, 4), Features(deadwrite_bypass=True), _BY_NVM_ENERGY
        ),
        "Hybrid": ConfigPreset("Hybrid", sram_64x2, CacheGeometry(256, 2), Features(), _HYBRID_ENERGY),
        "Base-FUSE": ConfigPreset(
            "Base-FUSE", sram_64x2, CacheGeometry(256, 2),
            Features(swap_buffer=True, tag_queue=True), _HYBRID_ENERGY,
        ),
        "FA-FUSE": ConfigPreset(
            "FA-FUSE", sram_64x2, CacheGeometry(1, 512),
            Features(swap_buffer=True, tag_queue=True, approx_fa=True), _FA_ENERGY,
        ),
        "Dy-FUSE": ConfigPreset(
            "Dy-FUSE", sram_64x2, CacheGeometry(1, 512),
            Features(swap_buffer=True, tag_queue=True, approx_fa=True, predictor=True), _FA_ENERGY,
        ),
    }


PRESETS = _build_presets()


def preset(name: str) -> ConfigPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None


SRAM_RATIOS = (Fraction(1, 16), Fraction(1, 8), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))


def ratio_preset(sram_fraction: Fraction | float | str, base: str = "Dy-FUSE") -> ConfigPreset:
    """Rebuild ``base`` with ``sram_fraction`` of the area budget given to SRAM.

    The rest of the budget becomes STT-MRAM at 4x density.  SRAM keeps its
    2-way organisation where the line count allows; an approximately
    fully-associative STT bank becomes a single set of all its lines, and a
    set-associative one keeps its ways unless that breaks the power-of-two
    set count.
    """
    frac = Fraction(sram_fraction)
    if not 0 < frac < 1:
        raise ValueError("sram fraction must lie strictly between 0 and 1")
    base_preset = preset(base)
    if base_preset.sram_geom is None or base_preset.stt_geom is None:
        raise ValueError(f"{base} has no SRAM/STT split to rescale")
    sram_bytes = frac * AREA_BUDGET_BYTES
    stt_bytes = (1 - frac) * AREA_BUDGET_BYTES * STT_DENSITY
    if sram_bytes.denominator != 1 or stt_bytes.denominator != 1:
        raise ValueError(f"fraction {frac} does not give whole-byte banks")
    sram_geom = CacheGeometry.from_capacity(int(sram_bytes))
    if base_preset.features.approx_fa:
        stt_geom = CacheGeometry(1, int(stt_bytes) // LINE_BYTES)
    else:
        try:
            stt_geom = CacheGeometry.from_capacity(int(stt_bytes), base_preset.stt_geom.ways)
        except ValueError:
            # keep the set count a power of two by widening the sets
            stt_geom = CacheGeometry.from_capacity(int(stt_bytes))
    return replace(base_preset, name=f"{base}@{frac}", sram_geom=sram_geom, stt_geom=stt_geom)
