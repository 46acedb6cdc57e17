"""Counting bloom filters with sticky 2-bit counters.

A :class:`FilterBank` holds one filter per tag-array partition.  All filters
share one hash family, so a line hashes to the same ``k`` counter positions
in every filter; the bank keeps, per position, a bitmask of the filters whose
counter there is non-zero.  Testing a line against all filters is then the
AND of ``k`` masks.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass

MASK64 = (1 << 64) - 1
COUNTER_MAX = 3
DEFAULT_HASHES = 3
DEFAULT_COUNTERS = 128


class UnderflowAttempt(AssertionError):
    """Decrement of a non-sticky counter that is already zero."""


class Membership(enum.Enum):
    NEGATIVE = 0
    POSITIVE = 1


class HashFamily:
    """``k`` multiply-shift hashes of a line address into ``[0, counters)``.

    Each function uses its own odd 64-bit multiplier drawn from ``seed``.
    """

    def __init__(self, k: int = DEFAULT_HASHES, counters: int = DEFAULT_COUNTERS, seed: int = 0):
        if k <= 0:
            raise ValueError("need at least one hash function")
        if counters < 2 or counters & (counters - 1):
            raise ValueError(f"counter count must be a power of two >= 2, got {counters}")
        self.k = k
        self.counters = counters
        self.seed = seed
        self._shift = 64 - (counters.bit_length() - 1)
        rng = random.Random(f"cbf-hash-{seed}")
        self.multipliers = tuple(rng.getrandbits(64) | 1 for _ in range(k))
        self._cache: dict[int, tuple[int, ...]] = {}

    def keys(self, elem: int) -> tuple[int, ...]:
        ks = self._cache.get(elem)
        if ks is None:
            shift = self._shift
            ks = tuple(((a * elem) & MASK64) >> shift for a in self.multipliers)
            if len(self._cache) > 1 << 16:
                self._cache.clear()
            self._cache[elem] = ks
        return ks

    def __repr__(self) -> str:
        return f"HashFamily(k={self.k}, counters={self.counters}, seed={self.seed})"


class CountingBloomFilter:
    """A single filter: ``counters`` 2-bit saturating counters.

    A counter that reaches 3 is sticky and never changes again, so an element
    that is still present can never be reported absent.
    """

    def __init__(self, family: HashFamily):
        self.family = family
        self.counts = [0] * family.counters
        self.sticky = [False] * family.counters

    def increment(self, elem: int) -> None:
        counts, sticky = self.counts, self.sticky
        for key in self.family.keys(elem):
            if not sticky[key]:
                counts[key] += 1
                if counts[key] == COUNTER_MAX:
                    sticky[key] = True

    def decrement(self, elem: int) -> None:
        counts, sticky = self.counts, self.sticky
        for key in self.family.keys(elem):
            if sticky[key]:
                continue
            if counts[key] == 0:
                raise UnderflowAttempt(f"counter {key} already zero while removing {elem:#x}")
            counts[key] -= 1

    def test(self, elem: int) -> Membership:
        counts = self.counts
        for key in self.family.keys(elem):
            if counts[key] == 0:
                return Membership.NEGATIVE
        return Membership.POSITIVE

    def __contains__(self, elem: int) -> bool:
        return self.test(elem) is Membership.POSITIVE


@dataclass
class FilterStats:
    searches: int = 0
    tests: int = 0
    positives: int = 0
    false_positives: int = 0

    @property
    def fp_rate(self) -> float:
        return self.false_positives / self.tests if self.tests else 0.0


class FilterBank:
    """``n`` counting bloom filters sharing one hash family."""

    def __init__(self, n: int, family: HashFamily):
        if n <= 0:
            raise ValueError("need at least one filter")
        self.n = n
        self.family = family
        m = family.counters
        self.counts = [[0] * m for _ in range(n)]
        self.sticky = [[False] * m for _ in range(n)]
        # key position -> bitmask of filters with a non-zero counter there
        self.nonzero = [0] * m
        self.stats = FilterStats()

    def increment(self, idx: int, elem: int) -> None:
        counts, sticky = self.counts[idx], self.sticky[idx]
        bit = 1 << idx
        for key in self.family.keys(elem):
            if sticky[key]:
                continue
            c = counts[key] + 1
            counts[key] = c
            if c == 1:
                self.nonzero[key] |= bit
            elif c == COUNTER_MAX:
                sticky[key] = True

    def decrement(self, idx: int, elem: int) -> None:
        counts, sticky = self.counts[idx], self.sticky[idx]
        for key in self.family.keys(elem):
            if sticky[key]:
                continue
            c = counts[key]
            if c == 0:
                raise UnderflowAttempt(f"filter {idx} counter {key} already zero while removing {elem:#x}")
            counts[key] = c - 1
            if c == 1:
                self.nonzero[key] &= ~(1 << idx)

    def positive_mask(self, elem: int) -> int:
        """Bitmask of filters answering Positive for ``elem`` (no stats)."""
        nz = self.nonzero
        mask = -1
        for key in self.family.keys(elem):
            mask &= nz[key]
        return mask & ((1 << self.n) - 1)

    def test(self, idx: int, elem: int) -> Membership:
        return Membership.POSITIVE if self.positive_mask(elem) >> idx & 1 else Membership.NEGATIVE

    def positives(self, elem: int) -> list[int]:
        """Indices of positive filters in ascending order."""
        mask = self.positive_mask(elem)
        out = []
        while mask:
            low = mask & -mask
            out.append(low.bit_length() - 1)
            mask ^= low
        return out

    def record_search(self, positives: int, hit: bool) -> None:
        st = self.stats
        st.searches += 1
        st.tests += self.n
        st.positives += positives
        st.false_positives += positives - (1 if hit else 0)

    def counter(self, idx: int, key: int) -> int:
        return self.counts[idx][key]

    def is_sticky(self, idx: int, key: int) -> bool:
        return self.sticky[idx][key]
