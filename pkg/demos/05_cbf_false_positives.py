"""
Counting bloom filter false positives
=====================================

Each partition filter holds four lines when the STT-MRAM bank is full.  This
script measures how often a filter wrongly answers "maybe present" for an
absent line, for different hash counts and counter-array sizes.  It also shows
the sticky counters: once a counter saturates at 3 it never decrements.
"""
import random

from fusesim.cbf import FilterBank, HashFamily


def fp_rate(k, counters, filters=128, per_filter=4, probes=20000, seed=0):
    bank = FilterBank(filters, HashFamily(k, counters, seed))
    rng = random.Random(seed)
    lines = rng.sample(range(1 << 25), filters * per_filter)
    for i, line in enumerate(lines):
        bank.increment(i // per_filter, line)
    taken = set(lines)
    absent = [x for x in (rng.randrange(1 << 25) for _ in range(probes)) if x not in taken]
    return sum(bin(bank.positive_mask(x)).count("1") for x in absent) / (len(absent) * filters)


print("false-positive rate per filter test")
print("counters " + "".join(f"   k={k}   " for k in (1, 2, 3, 4)))
for counters in (32, 64, 128):
    print(f"{counters:8d} " + "".join(f" {fp_rate(k, counters):8.4%}" for k in (1, 2, 3, 4)))

# Saturation: three inserts of one line pin its counters at 3.
bank = FilterBank(1, HashFamily())
for _ in range(3):
    bank.increment(0, 0xABC)
key = bank.family.keys(0xABC)[0]
for _ in range(3):
    bank.decrement(0, 0xABC)
print(f"\ncounter after 3 inserts and 3 removals: {bank.counter(0, key)} (sticky: {bank.is_sticky(0, key)})")
