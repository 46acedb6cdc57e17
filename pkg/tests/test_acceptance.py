"""End-to-end acceptance checks, one test per criterion.

Every test records a PASS/FAIL line that is repeated in the terminal summary.
Simulation results are cached per (trace, preset) so each run happens once,
always with the single-copy and swap-pairing checks enabled.
"""
import random
import time
from collections import Counter, OrderedDict
from functools import lru_cache

import pytest

from fusesim.cbf import FilterBank, HashFamily, Membership
from fusesim.engine import SimParams, Simulation, run
from fusesim.geometry import PRESET_NAMES, SRAM_RATIOS, ratio_preset
from fusesim.metrics import serialize
from fusesim.stt_bank import ApproxFAStt
from fusesim.trace import MixSpec, ReadLevel, generate_synthetic, label_fractions, label_trace

pytestmark = pytest.mark.slow

# One reference every 4 cycles: memory instructions interleaved with compute.
AVERAGE_MIX = dict(wm=0.1, read_intensive=0.05, worm=0.8, woro=0.05, wm_write_share=0.8, gap=4)
SUITE = {
    "worm-a": (MixSpec(pool=4000, refs=40000, window=300, **AVERAGE_MIX), 1),
    "worm-b": (MixSpec(pool=4000, refs=40000, window=300, **AVERAGE_MIX), 2),
    "capacity-a": (MixSpec(pool=3000, refs=60000, window=600, **AVERAGE_MIX), 1),
    "capacity-b": (MixSpec(pool=3000, refs=60000, window=600, **AVERAGE_MIX), 2),
    "write-heavy": (MixSpec(wm=0.5, read_intensive=0.05, worm=0.4, woro=0.05, pool=3000, refs=60000,
                            window=400, wm_write_share=0.8, gap=4), 1),
    "mixed": (MixSpec(wm=0.3, read_intensive=0.05, worm=0.6, woro=0.05, pool=3000, refs=60000,
                      window=400, wm_write_share=0.8, gap=4), 1),
}
WORM_TRACES = ("worm-a", "worm-b", "capacity-a", "capacity-b")
CAPACITY_TRACES = ("capacity-a", "capacity-b")


@lru_cache(maxsize=None)
def trace(name):
    spec, seed = SUITE[name]
    return generate_synthetic(spec, seed)


@lru_cache(maxsize=None)
def simulate(name, preset):
    """(report, STT filled to capacity at some point) for one suite run, invariants checked."""
    sim = Simulation(trace(name), preset, SimParams(check_invariants=True))
    report = sim.run()
    stt = sim.controller.stt
    full = stt is not None and stt.stats.evictions > 0
    return report, full


def test_suite_mixes_match_their_labels():
    for name in ("worm-a", "capacity-a"):
        fr = label_fractions(label_trace(trace(name)))
        assert abs(fr[ReadLevel.WORM] - 0.80) <= 0.02


# -- 1 ---------------------------------------------------------------------------

def test_fa_oracle_equivalence(criterion):
    start = time.perf_counter()
    deviations = 0
    for k in range(1000):
        rng = random.Random(k)
        pool = rng.choice([256, 600, 1024, 4096])
        base = rng.getrandbits(20) << 5
        refs = [base + x for x in rng.choices(range(pool), k=10_000)]
        bank = ApproxFAStt(512, family=HashFamily(3, 128, seed=k))
        fifo = OrderedDict()
        approx = bytearray(len(refs))
        plain = bytearray(len(refs))
        for i, line in enumerate(refs):
            if bank.search(line).hit:
                approx[i] = 1
            else:
                bank.insert(line)
            if line in fifo:
                plain[i] = 1
            else:
                if len(fifo) == 512:
                    fifo.popitem(last=False)
                fifo[line] = None
        deviations += approx != plain
    elapsed = time.perf_counter() - start
    criterion(1, "FA-oracle equivalence", deviations == 0 and elapsed <= 120,
              f"{deviations} deviating traces of 1000 x 10k refs in {elapsed:.0f}s (limit 120s)")


# -- 2 ---------------------------------------------------------------------------

def test_cbf_soundness(criterion):
    start = time.perf_counter()
    families = [HashFamily(3, counters, seed) for counters in (16, 128) for seed in range(4)]
    false_negatives = 0
    rng = random.Random(2024)
    for i in range(10_000):
        family = families[i % len(families)]
        bank = FilterBank(4, family)
        present = [Counter() for _ in range(4)]
        for _ in range(rng.randint(1, 40)):
            idx = rng.randrange(4)
            elem = rng.randrange(64)
            op = rng.random()
            if op < 0.55:
                bank.increment(idx, elem)
                present[idx][elem] += 1
            elif op < 0.85 and present[idx][elem]:
                bank.decrement(idx, elem)
                present[idx][elem] -= 1
            else:
                want = present[idx][elem] > 0
                if want and bank.test(idx, elem) is not Membership.POSITIVE:
                    false_negatives += 1
        for idx in range(4):
            for elem in +present[idx]:
                if bank.test(idx, elem) is not Membership.POSITIVE:
                    false_negatives += 1
    elapsed = time.perf_counter() - start
    criterion(2, "CBF soundness", false_negatives == 0 and elapsed <= 30,
              f"{false_negatives} false negatives over 10000 sequences in {elapsed:.1f}s (limit 30s)")


# -- 3 ---------------------------------------------------------------------------

def false_positive_rate(k, counters, seeds=range(3), per_filter=4, filters=128, probes=10_000):
    """Mean positive-filter fraction for absent lines, every filter holding ``per_filter`` lines."""
    total = 0.0
    for seed in seeds:
        bank = FilterBank(filters, HashFamily(k, counters, seed))
        rng = random.Random(seed)
        resident = rng.sample(range(1 << 25), filters * per_filter)
        for i, line in enumerate(resident):
            bank.increment(i // per_filter, line)
        taken = set(resident)
        absent = [x for x in (rng.randrange(1 << 25) for _ in range(probes + 100)) if x not in taken][:probes]
        total += sum(bin(bank.positive_mask(x)).count("1") for x in absent) / (len(absent) * filters)
    return total / len(seeds)


def test_cbf_false_positive_trends(criterion):
    start = time.perf_counter()
    k1, k3 = false_positive_rate(1, 128), false_positive_rate(3, 128)
    c32 = false_positive_rate(3, 32)
    by_hashes = 1 - k3 / k1
    by_counters = 1 - k3 / c32
    elapsed = time.perf_counter() - start
    criterion(3, "CBF false-positive trends",
              by_hashes >= 0.80 and by_counters >= 0.90 and elapsed <= 60,
              f"k=3 vs k=1 {by_hashes:.1%} fewer (need 80%), 128 vs 32 counters {by_counters:.1%} fewer "
              f"(need 90%), {elapsed:.0f}s")


# -- 4 ---------------------------------------------------------------------------

def test_predictor_accuracy(criterion):
    start = time.perf_counter()
    accs = {name: simulate(name, "Dy-FUSE")[0].pred_accuracy for name in ("worm-a", "worm-b")}
    elapsed = time.perf_counter() - start
    worst = min(accs.values())
    detail = ", ".join(f"{n} {a:.3f}" for n, a in accs.items())
    criterion(4, "read-level predictor accuracy", worst >= 0.85 and elapsed <= 60,
              f"{detail} (need >= 0.85 after 10% warm-up), {elapsed:.0f}s")


# -- 5 ---------------------------------------------------------------------------

def test_tag_queue_flush_fraction(criterion):
    fracs = {name: simulate(name, "Dy-FUSE")[0].flush_fraction for name in WORM_TRACES}
    worst = max(fracs.values())
    criterion(5, "tag-queue flush fraction", worst <= 0.10,
              ", ".join(f"{n} {f:.3f}" for n, f in fracs.items()) + " (need <= 0.10)")


# -- 6 ---------------------------------------------------------------------------

def test_search_latency(criterion):
    rows = []
    ok = True
    for name in SUITE:
        for preset in ("FA-FUSE", "Dy-FUSE"):
            r, full = simulate(name, preset)
            ok &= full and r.mean_search_cycles <= 2.0
            rows.append(f"{name}/{preset} {r.mean_search_cycles:.3f}{'' if full else ' (STT never full)'}")
    worst = max(simulate(n, p)[0].mean_search_cycles for n in SUITE for p in ("FA-FUSE", "Dy-FUSE"))
    criterion(6, "mean STT search cycles", ok, f"worst {worst:.3f} (need <= 2.0); " + ", ".join(rows))


# -- 7 ---------------------------------------------------------------------------

def test_stall_dominance_and_reduction(criterion):
    dominated = []
    for name in SUITE:
        base, hybrid = simulate(name, "Base-FUSE")[0], simulate(name, "Hybrid")[0]
        dominated.append((name, base.stall_total, hybrid.stall_total))
    all_dominated = all(b <= h for _, b, h in dominated)
    _, b, h = next(row for row in dominated if row[0] == "write-heavy")
    reduction = 1 - b / h if h else 0.0
    detail = "; ".join(f"{n} {b}<={h}" for n, b, h in dominated)
    criterion(7, "stall dominance and reduction", all_dominated and reduction >= 0.5,
              f"write-heavy reduction {reduction:.1%} (need 50%); Base-FUSE vs Hybrid stalls: {detail}")


# -- 8 ---------------------------------------------------------------------------

def test_miss_rate_ordering(criterion):
    ok = True
    rows = []
    for name in CAPACITY_TRACES:
        fa, hy, l1 = (simulate(name, p)[0].miss_rate for p in ("FA-FUSE", "Hybrid", "L1-SRAM"))
        ok &= fa <= hy <= l1 and l1 - fa >= 0.10
        rows.append(f"{name} FA-FUSE {fa:.3f} <= Hybrid {hy:.3f} <= L1-SRAM {l1:.3f}")
    criterion(8, "miss-rate ordering", ok, "; ".join(rows) + " (FA-FUSE needs 10 points below L1-SRAM)")


# -- 9 ---------------------------------------------------------------------------

def test_offchip_traffic(criterion):
    ok = True
    rows = []
    for name in CAPACITY_TRACES:
        dy, l1 = simulate(name, "Dy-FUSE")[0].offchip_requests, simulate(name, "L1-SRAM")[0].offchip_requests
        ok &= dy <= 0.8 * l1
        rows.append(f"{name} {dy}/{l1} = {dy / l1:.2f}")
    criterion(9, "off-chip traffic", ok, "; ".join(rows) + " (need <= 0.80)")


# -- 10 --------------------------------------------------------------------------

def test_single_copy_invariant(criterion):
    # simulate() runs with check_invariants on: any violation raises before a report exists
    runs = 0
    for name in SUITE:
        for preset in PRESET_NAMES:
            simulate(name, preset)
            runs += 1
    criterion(10, "single-copy invariant", runs == len(SUITE) * len(PRESET_NAMES),
              f"checked after every event in {runs} runs ({len(SUITE)} traces x {len(PRESET_NAMES)} presets)")


# -- 11 --------------------------------------------------------------------------

def test_ratio_sweep(criterion):
    amat = {str(f): run(trace("mixed"), ratio_preset(f)).amat_cycles for f in SRAM_RATIOS}
    best = min(amat.values())
    half = amat["1/2"]
    criterion(11, "SRAM:STT ratio sweep", half <= 1.02 * best,
              ", ".join(f"{k} {v:.2f}" for k, v in amat.items()) + f"; 1/2 is {half / best - 1:.2%} above best")


# -- 12 --------------------------------------------------------------------------

def test_determinism_and_energy_linearity(criterion):
    short = generate_synthetic(MixSpec(wm=0.3, read_intensive=0.05, worm=0.6, woro=0.05, pool=600, refs=8000,
                                       window=200, wm_write_share=0.8, gap=4), 5)
    identical = all(serialize(run(short, p), fmt) == serialize(run(short, p), fmt)
                    for p in PRESET_NAMES for fmt in ("json", "csv"))
    doubled = True
    for p in PRESET_NAMES:
        once = run(short, p)
        twice = run(short, p, SimParams(replays=2))
        doubled &= (twice.energy_sram_dynamic_nj == 2 * once.energy_sram_dynamic_nj
                    and twice.energy_stt_dynamic_nj == 2 * once.energy_stt_dynamic_nj)
    criterion(12, "determinism and energy linearity", identical and doubled,
              f"byte-identical reports: {identical}; dynamic energy doubles exactly on replay: {doubled}")
