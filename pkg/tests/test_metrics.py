import json

import pytest
from hypothesis import given, strategies as st

from fusesim.geometry import TimingEnergyParams
from fusesim.metrics import (
    SimReport, deserialize, energy, judge, score_predictions, serialize,
)
from fusesim.predictor import Prediction

PARAMS = TimingEnergyParams()


def test_zero_energy():
    assert energy(0, 0, 0, 0, PARAMS, 0) == (0, 0, 0, 0)


def test_hundred_stt_writes():
    assert energy(0, 0, 0, 100, PARAMS, 0).stt_dynamic == pytest.approx(240.0)


def test_leakage_over_thousand_cycles():
    e = energy(0, 0, 0, 0, PARAMS, 1000)
    assert PARAMS.clock_hz == 700e6 and PARAMS.sram_leak_mw + PARAMS.stt_leak_mw == pytest.approx(38.4)
    assert e.leakage == pytest.approx(38.4 * 1000 / 700e6 * 1e6)
    assert e.leakage == pytest.approx(54.857, abs=1e-3)


@given(st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6), st.integers(0, 10**6),
       st.integers(0, 10**9))
def test_energy_is_linear(a, b, c, d, t):
    one = energy(a, b, c, d, PARAMS, t)
    two = energy(2 * a, 2 * b, 2 * c, 2 * d, PARAMS, 2 * t)
    for x, y in zip(one, two):
        assert y == pytest.approx(2 * x)


def test_scoring_rule():
    assert judge(Prediction.WORM, 1) is True
    assert judge(Prediction.WORO, 1) is True
    assert judge(Prediction.WM, 1) is False
    assert judge(Prediction.WM, 3) is True
    assert judge(Prediction.WORM, 2) is False
    assert judge(Prediction.NEUTRAL, 5) is None
    tally = score_predictions([(Prediction.WORM, 1), (Prediction.WM, 1), (Prediction.NEUTRAL, 1)])
    assert tally == (1, 1, 1) and tally.accuracy == pytest.approx(1 / 3)


def test_empty_report_is_all_zero():
    r = SimReport().finalize()
    assert all(v == 0 for k, v in r.to_dict().items() if k != "preset")
    row = serialize(r, "csv").decode().splitlines()[1]
    assert set(row.split(",")[1:]) <= {"0", "0.0"}


def test_csv_header_is_documented_schema():
    header = serialize(SimReport(), "csv").decode().splitlines()[0].split(",")
    assert header == SimReport.field_names()
    assert header[:6] == ["preset", "accesses", "sram_hits", "stt_hits", "misses", "miss_rate"]
    assert header[-4:] == ["energy_sram_dynamic_nj", "energy_stt_dynamic_nj", "energy_leakage_nj",
                           "energy_total_nj"]


def sample_report(k=1):
    return SimReport(preset="Dy-FUSE", accesses=10 * k, sram_hits=5 * k, misses=3 * k, latency_sum=400 * k,
                     cbf_tests=128 * k, cbf_false_positives=k, stall_stt_write=7 * k, stall_mshr_full=2 * k,
                     energy_stt_dynamic_nj=1.1 * k, energy_leakage_nj=0.3 * k, total_cycles=99 * k).finalize()


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_round_trip(fmt):
    reports = [sample_report(1), sample_report(3)]
    data = serialize(reports, fmt)
    assert deserialize(data, fmt) == reports
    assert serialize(deserialize(data, fmt), fmt) == data


def test_json_idempotent_and_single_object():
    data = serialize(sample_report(), "json")
    assert isinstance(json.loads(data), dict)
    assert serialize(deserialize(data)[0]) == data


def test_derived_fields():
    r = sample_report()
    assert r.miss_rate == pytest.approx(0.3)
    assert r.amat_cycles == pytest.approx(40)
    assert (r.stall_total, r.stt_stall_cycles) == (9, 7)
    assert 0 <= r.fp_rate <= 1 and r.cbf_false_positives <= r.cbf_tests
    assert r.energy_total_nj == pytest.approx(1.4)


def test_adding_reports_sums_counters():
    s = sample_report(1) + sample_report(2)
    assert s == sample_report(3)
    with pytest.raises(ValueError):
        sample_report() + SimReport(preset="Hybrid")


def test_unknown_format():
    with pytest.raises(ValueError):
        serialize(SimReport(), "xml")
