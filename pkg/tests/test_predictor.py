import pytest
from hypothesis import given, strategies as st

from fusesim.predictor import (
    COUNTER_INIT, Prediction, ReadLevelPredictor, Status, sampler_tag, signature,
)
from fusesim.trace import Op, TraceRecord

P = 0x400
Q = 0x800


def rec(op, line, pc=P, warp=0):
    return TraceRecord(0, warp, pc, line << 7, Op(op))


def test_bit_selection():
    assert sampler_tag(0xFFFFFFFF) == 0x7FFF
    assert sampler_tag(0x2080) == 0x41
    assert signature(0x404) == 0x101
    assert signature(0xFFFFFFFF) == 0x1FF


def test_fresh_table_is_neutral():
    pred = ReadLevelPredictor()
    assert pred.classify(0x12345678) is Prediction.NEUTRAL
    assert pred.entry(P).counter == COUNTER_INIT


def test_unused_eviction_increments_fill_signature():
    pred = ReadLevelPredictor()
    pred.observe(rec("W", 1))
    for line in range(2, 10):  # eight more lines from Q push line 1 out of the 8-way set
        pred.observe(rec("R", line, Q))
    assert pred.entry(P).counter == 9
    assert pred.entry(Q).counter == COUNTER_INIT


def test_reuse_decrements_and_sets_status():
    pred = ReadLevelPredictor()
    pred.observe(rec("W", 1))
    pred.observe(rec("R", 1))
    e = pred.entry(P)
    assert (e.counter, e.status) == (7, Status.R)
    pred.observe(rec("W", 1))
    assert (e.counter, e.status) == (6, Status.W)


def test_unsampled_warp_changes_nothing():
    pred = ReadLevelPredictor()
    pred.observe(rec("W", 1, warp=5))
    pred.observe(rec("R", 1, warp=5))
    assert pred.observed == 0
    assert all(not s for s in pred.sampler)
    assert pred.entry(P).counter == COUNTER_INIT


def test_eight_read_hits_make_worm():
    pred = ReadLevelPredictor()
    pred.observe(rec("W", 1))
    for _ in range(8):
        pred.observe(rec("R", 1))
    assert pred.entry(P).counter == 0
    assert pred.classify(P) is Prediction.WORM


def test_write_hits_make_wm():
    pred = ReadLevelPredictor()
    for _ in range(9):
        pred.observe(rec("W", 1))
    assert pred.classify(P) is Prediction.WM


def test_seven_unused_evictions_make_woro():
    pred = ReadLevelPredictor()
    line = 100
    for _ in range(7):
        pred.observe(rec("W", line))
        for _ in range(8):
            line += 1
            pred.observe(rec("R", line, Q))
        line += 1
    assert pred.entry(P).counter == 15
    assert pred.classify(P) is Prediction.WORO


@pytest.mark.parametrize("counter,status,want", [
    (15, Status.R, Prediction.WORO),
    (14, Status.R, Prediction.NEUTRAL),
    (2, Status.W, Prediction.NEUTRAL),
    (1, Status.R, Prediction.WORM),
    (1, Status.W, Prediction.WM),
    (0, Status.W, Prediction.WM),
])
def test_classify_regions(counter, status, want):
    pred = ReadLevelPredictor()
    e = pred.entry(P)
    e.counter, e.status = counter, status
    assert pred.classify(P) is want


def test_sampler_sets_follow_sampled_warps():
    pred = ReadLevelPredictor()
    for set_idx, warp in enumerate((0, 12, 24, 36)):
        pred.observe(rec("R", set_idx + 1, warp=warp))
        assert pred.lru_tags(set_idx) == [set_idx + 1]


def test_dump_csv():
    pred = ReadLevelPredictor(entries=4)
    rows = pred.dump_csv().splitlines()
    assert rows[0] == "signature,counter,status"
    assert rows[1:] == ["0,8,R", "1,8,R", "2,8,R", "3,8,R"]


records = st.lists(
    st.builds(TraceRecord, st.just(0), st.sampled_from([0, 5, 12, 24, 36]), st.integers(0, 64).map(lambda x: x * 4),
              st.integers(0, 40).map(lambda x: x << 7), st.sampled_from(list(Op))),
    max_size=300,
)


@given(records)
def test_counters_stay_in_range_and_classify_is_pure(recs):
    pred = ReadLevelPredictor()
    for r in recs:
        pred.observe(r)
        before = [(h.counter, h.status) for h in pred.table]
        pred.classify(r.pc)
        assert [(h.counter, h.status) for h in pred.table] == before
        assert all(0 <= h.counter <= 15 for h in pred.table)
        assert all(len(s) <= 8 for s in pred.sampler)
