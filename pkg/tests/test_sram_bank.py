import random

import pytest
from hypothesis import given, strategies as st

from fusesim.geometry import CacheGeometry
from fusesim.sram_bank import Replacement, SetAssocBank, SramBank

G = CacheGeometry(64, 4)


def same_set(n, set_index=5, sets=64):
    return [set_index + i * sets for i in range(n)]


class ListLru:
    """Reference model: one Python list per set, most recent last."""

    def __init__(self, sets, ways):
        self.sets = [[] for _ in range(sets)]
        self.ways = ways
        self.n = sets

    def access(self, line):
        s = self.sets[line % self.n]
        if line in s:
            s.remove(line)
            s.append(line)
            return True
        if len(s) == self.ways:
            s.pop(0)
        s.append(line)
        return False


def test_empty_bank_misses():
    assert not SramBank(G).lookup(0x1234)


def test_fill_then_hit():
    b = SramBank(G)
    b.fill(0x40)
    assert b.lookup(0x40) and 0x40 in b


def test_fifth_fill_evicts_least_recent():
    b = SramBank(G)
    lines = same_set(5)
    victims = [b.fill(x) for x in lines]
    assert victims[:4] == [None] * 4
    assert victims[4].line == lines[0]
    assert not b.lookup(lines[0])


def test_write_hit_sets_dirty_read_hit_does_not():
    b = SramBank(G)
    b.fill(7)
    assert b.access(7, False) == (True, False, 1)
    assert not b.get(7).dirty
    assert b.access(7, True).dirty_set
    assert b.get(7).dirty
    b.access(7, False)
    assert b.get(7).dirty


def test_hits_reorder_lru():
    b = SramBank(G)
    a, c, d = same_set(3)
    for x in (a, c, d):
        b.fill(x)
    b.access(a, False)
    b.access(c, False)
    assert b.lru_order(5) == [d, a, c]


def test_dirty_victim_reports_dirty_and_signature():
    b = SramBank(CacheGeometry(1, 1))
    b.fill(3, fill_sig=0x1AB, dirty=True)
    v = b.fill(4)
    assert v.line == 3 and v.dirty and v.fill_sig == 0x1AB and v.addr == 3 << 7


def test_victim_for_previews_without_change():
    b = SramBank(CacheGeometry(1, 2))
    b.fill(1)
    assert b.victim_for(2) is None
    b.fill(2)
    assert b.victim_for(3).line == 1 and b.victim_for(2) is None
    assert sorted(b.lines()) == [1, 2]


def test_invalidate():
    b = SramBank(G)
    assert not b.invalidate(9)
    a, c = same_set(2)
    b.fill(a)
    b.fill(c)
    assert b.invalidate(a) and not b.lookup(a)
    assert b.lookup(c) and b.occupancy == 1


def test_double_fill_is_a_bug():
    b = SramBank(G)
    b.fill(1)
    with pytest.raises(AssertionError):
        b.fill(1)


def test_fifo_policy_ignores_hits():
    b = SetAssocBank(CacheGeometry(1, 2), Replacement.FIFO)
    b.fill(1)
    b.fill(2)
    b.access(1, False)
    assert b.fill(3).line == 1


@pytest.mark.parametrize("geom", [CacheGeometry(64, 4), CacheGeometry(64, 2), CacheGeometry(1, 256)])
def test_matches_list_lru_on_100k_accesses(geom):
    rng = random.Random(geom.ways)
    bank = SramBank(geom)
    ref = ListLru(geom.sets, geom.ways)
    pool = geom.lines * 3
    for _ in range(100_000):
        line = rng.randrange(pool)
        got = bank.access(line, rng.random() < 0.3).hit
        if not got:
            bank.fill(line)
        assert got == ref.access(line)


@given(st.lists(st.tuples(st.integers(0, 20), st.booleans()), max_size=200))
def test_dirty_is_monotone_until_eviction(ops):
    b = SramBank(CacheGeometry(2, 2))
    dirty = {}
    for line, write in ops:
        if b.access(line, write).hit:
            dirty[line] = dirty[line] or write
        else:
            v = b.fill(line, dirty=write)
            if v is not None:
                assert v.dirty == dirty.pop(v.line)
            dirty[line] = write
        for x, d in dirty.items():
            assert b.get(x).dirty == d
