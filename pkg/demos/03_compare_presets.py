"""
Seven L1D organisations on one trace
====================================

Runs every preset on a capacity-stressed, WORM-heavy trace and prints the
headline numbers.  AMAT (average memory access time, in cycles) is the
performance proxy; the simulator does not model the SM pipeline or IPC.
"""
from fusesim import PRESET_NAMES, MixSpec, generate_synthetic, run

spec = MixSpec(wm=0.1, read_intensive=0.05, worm=0.8, woro=0.05, pool=3000, refs=60000, window=600,
               wm_write_share=0.8, gap=4)
trace = generate_synthetic(spec, seed=3)

header = f"{'preset':10s} {'miss':>6s} {'AMAT':>7s} {'stalls':>8s} {'off-chip':>9s} {'energy uJ':>10s}"
print(header)
print("-" * len(header))
reports = {name: run(trace, name) for name in PRESET_NAMES}
for name, r in reports.items():
    print(f"{name:10s} {r.miss_rate:6.3f} {r.amat_cycles:7.1f} {r.stall_total:8d} {r.offchip_requests:9d} "
          f"{r.energy_total_nj / 1000:10.2f}")

base = reports["L1-SRAM"]
dy = reports["Dy-FUSE"]
print(f"\nDy-FUSE sends {1 - dy.offchip_requests / base.offchip_requests:.0%} fewer requests off-chip than L1-SRAM")
hy, bf = reports["Hybrid"], reports["Base-FUSE"]
print(f"Base-FUSE stalls {1 - bf.stall_total / hy.stall_total:.0%} less than Hybrid")
print(f"Dy-FUSE predictor accuracy {dy.pred_accuracy:.1%}, tag-queue flushes on {dy.flush_fraction:.1%} of requests")
