"""
Searching a fully-associative STT-MRAM tag array with bloom filters
==================================================================

The 512-line STT-MRAM bank is fully associative but has only four tag
comparators.  Its slots are split into 128 partitions of four, each with a
counting bloom filter.  A lookup tests all filters at once and polls only the
positive partitions, one per cycle.

Hit/miss outcomes are identical to a plain FIFO cache.  Only the number of
search cycles depends on the filters.
"""
import random
from collections import Counter, OrderedDict

from fusesim.cbf import HashFamily
from fusesim.stt_bank import ApproxFAStt

rng = random.Random(7)
refs = [rng.randrange(900) for _ in range(20000)]

bank = ApproxFAStt(512, family=HashFamily(k=3, counters=128))
fifo = OrderedDict()
cycles = Counter()
mismatches = 0
for line in refs:
    result = bank.search(line)
    if not result.hit:
        bank.insert(line)
    cycles[result.search_cycles] += 1

    hit = line in fifo
    if not hit:
        if len(fifo) == 512:
            fifo.popitem(last=False)
        fifo[line] = None
    mismatches += hit != result.hit

print(f"outcome mismatches against a plain FIFO: {mismatches}")
print(f"mean search cycles: {bank.stats.mean_search_cycles:.3f}")
print("search-cycle histogram:", dict(sorted(cycles.items())))
fs = bank.filters.stats
print(f"filters tested: {fs.tests}, false positives: {fs.false_positives} ({fs.fp_rate:.4%})")

# Fewer counters per filter means more collisions and longer searches.
for counters in (16, 32, 64, 128):
    b = ApproxFAStt(512, family=HashFamily(3, counters))
    for line in refs:
        if not b.search(line).hit:
            b.insert(line)
    print(f"  {counters:3d} counters: mean search {b.stats.mean_search_cycles:.2f} cycles")
