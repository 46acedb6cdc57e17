"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 trace parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Sequence

from . import trace as tr
from .engine import ConfigError, SimParams, Simulation, apply_overrides, parse_config
from .geometry import PRESET_NAMES, SRAM_RATIOS, ConfigPreset, UnknownPreset, preset
from .metrics import SimReport, serialize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRACE = 3

NORMALIZED = ("amat_cycles", "total_cycles", "miss_rate", "stall_total", "offchip_requests", "energy_total_nj")
SWEEP_AXES = {
    "sram_ratio": tuple(str(f) for f in SRAM_RATIOS),
    "cbf_hashes": ("1", "2", "3", "4"),
    "cbf_slots": ("32", "64", "128"),
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".fusesim-", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(data: bytes, out: str | None) -> None:
    if out:
        atomic_write(out, data)
    else:
        sys.stdout.write(data.decode())


# -- argument handling --------------------------------------------------------


def _parse_overrides(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise CliError(EXIT_CONFIG, f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _load_trace(args) -> list[tr.TraceRecord]:
    if args.synthetic:
        try:
            spec = tr.load_mix(args.synthetic)
        except OSError as exc:
            raise CliError(EXIT_CONFIG, f"cannot read mix file: {exc}") from None
        except tr.InvalidMix as exc:
            raise CliError(EXIT_CONFIG, f"bad mix: {exc}") from None
        try:
            return tr.generate_synthetic(spec, args.seed)
        except tr.InvalidMix as exc:
            raise CliError(EXIT_CONFIG, f"bad mix: {exc}") from None
    if not args.trace:
        raise CliError(EXIT_CONFIG, "give a trace file or --synthetic MIXFILE")
    try:
        return tr.read_trace(args.trace)
    except OSError as exc:
        raise CliError(EXIT_TRACE, f"cannot read trace: {exc}") from None
    except tr.MalformedLine as exc:
        raise CliError(EXIT_TRACE, f"{args.trace}: {exc}") from None


def _settings(args) -> dict[str, str]:
    settings: dict[str, str] = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                settings.update(parse_config(fh.read()))
        except OSError as exc:
            raise CliError(EXIT_CONFIG, f"cannot read config: {exc}") from None
        except ConfigError as exc:
            raise CliError(EXIT_CONFIG, str(exc)) from None
    settings.update(_parse_overrides(args.override))
    settings.setdefault("controller.seed", str(args.seed))
    return settings


def _configure(name: str, settings: dict[str, str]) -> tuple[ConfigPreset, SimParams]:
    try:
        base = preset(name)
        return apply_overrides(base, SimParams(), settings)
    except UnknownPreset as exc:
        raise CliError(EXIT_CONFIG, str(exc.args[0])) from None
    except (ConfigError, ValueError) as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def _simulate(job: tuple) -> SimReport:
    records, p, params = job
    return Simulation(records, p, params).run()


def _run_jobs(jobs: list[tuple], workers: int) -> list[SimReport]:
    if workers <= 1 or len(jobs) <= 1:
        return [_simulate(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate, jobs))


def _table(rows: list[dict], fmt: str) -> bytes:
    if fmt == "json":
        return (json.dumps(rows, indent=2) + "\n").encode()
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["preset"], lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue().encode()


# -- commands -----------------------------------------------------------------


def cmd_run(args) -> int:
    records = _load_trace(args)
    p, params = _configure(args.preset, _settings(args))
    sim = Simulation(records, p, params)
    report = sim.run()
    emit(serialize(report, args.format), args.out)
    if args.history_out:
        if sim.controller.predictor is None:
            raise CliError(EXIT_CONFIG, f"{p.name} has no read-level predictor")
        atomic_write(args.history_out, sim.controller.predictor.dump_csv().encode())
    return EXIT_OK


def compare_rows(reports: list[SimReport]) -> list[dict]:
    rows = []
    first = reports[0] if reports else None
    for r in reports:
        row = r.to_dict()
        for key in NORMALIZED:
            ref = getattr(first, key)
            row[f"norm_{key}"] = getattr(r, key) / ref if ref else (1.0 if getattr(r, key) == ref else float("inf"))
        rows.append(row)
    return rows


def cmd_compare(args) -> int:
    records = _load_trace(args)
    names = [n.strip() for n in args.presets.split(",") if n.strip()]
    if not names:
        raise CliError(EXIT_CONFIG, "no presets given")
    settings = _settings(args)
    jobs = [(records, *_configure(n, settings)) for n in names]
    reports = _run_jobs(jobs, args.jobs)
    emit(_table(compare_rows(reports), args.format), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    records = _load_trace(args)
    settings = _settings(args)
    points = SWEEP_AXES[args.axis]
    jobs = []
    for value in points:
        point = dict(settings)
        if args.axis == "sram_ratio":
            point["geometry.sram_ratio"] = value
        elif args.axis == "cbf_hashes":
            point["controller.cbf_hashes"] = value
        else:
            point["controller.cbf_counters"] = value
        p, params = _configure(args.preset, point)
        if args.axis != "sram_ratio" and not p.features.approx_fa:
            raise CliError(EXIT_CONFIG, f"{p.name} has no CBF-guided STT bank to sweep")
        jobs.append((records, p, params))
    reports = _run_jobs(jobs, args.jobs)
    rows = []
    for value, r in zip(points, reports):
        row = {"axis": args.axis, "point": value}
        if args.axis == "sram_ratio":
            row["sram_fraction"] = float(Fraction(value))
        row.update(r.to_dict())
        rows.append(row)
    emit(_table(rows, args.format), args.out)
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        spec = tr.load_mix(args.mix)
        records = tr.generate_synthetic(spec, args.seed)
    except OSError as exc:
        raise CliError(EXIT_CONFIG, f"cannot read mix file: {exc}") from None
    except tr.InvalidMix as exc:
        raise CliError(EXIT_CONFIG, f"bad mix: {exc}") from None
    emit(tr.dumps_trace(records).encode(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fusesim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default):
        p.add_argument("trace", nargs="?", help="trace file (cycle,warp,pc,addr,R|W per line)")
        p.add_argument("--synthetic", metavar="MIXFILE", help="generate the trace from a key=value mix file")
        p.add_argument("--seed", type=int, default=0, help="generator and hash seed")
        p.add_argument("--override", "-O", action="append", metavar="KEY=VALUE",
                       help="dotted setting, e.g. downstream.l2_round_trip_cycles=60")
        p.add_argument("--config", metavar="FILE", help="settings file ([section] + key = value)")
        p.add_argument("--out", metavar="PATH", help="output file (written atomically); stdout if omitted")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p_run = sub.add_parser("run", help="simulate one configuration")
    common(p_run, "json")
    p_run.add_argument("--preset", default="Dy-FUSE", help=f"one of {', '.join(PRESET_NAMES)}")
    p_run.add_argument("--history-out", metavar="PATH", help="write the predictor history table as CSV")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several presets on one trace")
    common(p_cmp, "csv")
    p_cmp.add_argument("--presets", default=",".join(PRESET_NAMES), help="comma-separated preset names")
    p_cmp.set_defaults(func=cmd_compare)

    p_sw = sub.add_parser("sweep", help="sweep SRAM:STT ratio or CBF parameters")
    common(p_sw, "csv")
    p_sw.add_argument("--axis", choices=sorted(SWEEP_AXES), required=True)
    p_sw.add_argument("--preset", default="Dy-FUSE")
    p_sw.set_defaults(func=cmd_sweep)

    p_gen = sub.add_parser("generate", help="write a synthetic trace")
    p_gen.add_argument("--mix", required=True, metavar="MIXFILE")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", metavar="PATH")
    p_gen.set_defaults(func=cmd_generate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"fusesim: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    raise SystemExit(main())
