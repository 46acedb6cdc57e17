"""
Splitting the area budget between SRAM and STT-MRAM
===================================================

The L1D area budget buys 32KB of SRAM, or four times as much STT-MRAM.  Each
point gives a fraction of that budget to SRAM and the rest to STT-MRAM.
More SRAM helps write-heavy lines; more STT-MRAM holds more read-only data.
"""
from fusesim import MixSpec, generate_synthetic, ratio_preset, run
from fusesim.geometry import SRAM_RATIOS

spec = MixSpec(wm=0.3, read_intensive=0.05, worm=0.6, woro=0.05, pool=3000, refs=30000, window=400,
               wm_write_share=0.8, gap=4)
trace = generate_synthetic(spec, seed=1)

results = []
for frac in SRAM_RATIOS:
    p = ratio_preset(frac)
    r = run(trace, p)
    results.append((frac, p, r))
    print(f"SRAM {str(frac):5s}  {p.sram_bytes // 1024:3d}KB SRAM + {p.stt_bytes // 1024:3d}KB STT   "
          f"AMAT {r.amat_cycles:6.2f}  miss {r.miss_rate:.3f}")

best = min(results, key=lambda x: x[2].amat_cycles)
print(f"\nlowest AMAT at SRAM fraction {best[0]}")
