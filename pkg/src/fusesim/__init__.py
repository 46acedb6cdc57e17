"""Trace-driven simulator of a heterogeneous SRAM/STT-MRAM GPU L1D cache."""
from .engine import SimParams, Simulation, run
from .geometry import PRESET_NAMES, ConfigPreset, preset, ratio_preset
from .metrics import SimReport
from .predictor import Prediction, ReadLevelPredictor
from .trace import (
    MixSpec, ReadLevel, TraceRecord, generate_synthetic, label_fractions, label_trace, parse_trace,
)

__all__ = [
    "ConfigPreset", "MixSpec", "PRESET_NAMES", "Prediction", "ReadLevel", "ReadLevelPredictor", "SimParams",
    "SimReport", "Simulation", "TraceRecord", "generate_synthetic", "label_fractions", "label_trace",
    "parse_trace", "preset", "ratio_preset", "run",
]
__version__ = "0.1.0"
