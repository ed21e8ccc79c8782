import random
from types import SimpleNamespace

import pytest
from hypothesis import given, strategies as st

from satlink import metrics
from satlink.config import CRDSA3, DEDICATED, Scenario
from satlink.engine import run_scenario
from satlink.metrics import SessionStats


def fake_result(frame_bits, duration=20.0, frame_us=45_000):
    return SimpleNamespace(frame_bits=frame_bits, duration_s=duration, frame_us=frame_us,
                           frame_throughput=[b / (frame_us / 1e6) for b in frame_bits])


def test_throughput_arithmetic():
    assert metrics.throughput(fake_result([0] * 444)) == 0
    assert metrics.throughput(fake_result([100 * 1500 * 8] + [0] * 443)) == 60_000
    with pytest.raises(ValueError):
        metrics.throughput(fake_result([0], duration=0))


def test_session_stats_examples():
    assert metrics.session_stats([1, 2, 3]) == SessionStats(1, 2, 3)
    assert metrics.session_stats({i: 300 for i in range(100)}) == SessionStats(300, 300, 300)
    assert metrics.session_stats([4, 1, 3, 2]).med == 2
    with pytest.raises(ValueError):
        metrics.session_stats([])
    with pytest.raises(ValueError):
        SessionStats(3, 2, 1)


@given(st.lists(st.integers(0, 2000), min_size=1, max_size=50), st.randoms())
def test_session_stats_permutation_invariant(counts, rnd):
    shuffled = counts[:]
    rnd.shuffle(shuffled)
    s = metrics.session_stats(counts)
    assert s == metrics.session_stats(shuffled)
    assert s.min <= s.med <= s.max


def test_time_to_n():
    trace = [(385_000, 1), (430_000, 2), (520_000, 5)]
    assert metrics.time_to_n_datagrams(trace, 0) == 0.0
    assert metrics.time_to_n_datagrams(trace, 2) == pytest.approx(0.43)
    assert metrics.time_to_n_datagrams(trace, 4) == pytest.approx(0.52)
    assert metrics.time_to_n_datagrams(trace, 6) is None
    with pytest.raises(ValueError):
        metrics.time_to_n_datagrams(trace, -1)
    assert metrics.delivered_by(trace, 0.5) == 2


@pytest.fixture(scope="module")
def small_run():
    return run_scenario(Scenario(access_method=CRDSA3, num_sessions=120, duration_s=5))


def test_reception_curve_matches_mean_time(small_run):
    curve = dict(metrics.reception_curve(small_run))
    for n in (1, 5, 20):
        assert curve[n] == pytest.approx(metrics.mean_time_to_n(small_run, n))


def test_frame_and_total_throughput_agree(small_run):
    assert metrics.frame_throughput_mean(small_run) == pytest.approx(metrics.throughput(small_run))


def test_loss_ratio_bounds(small_run):
    assert 0 <= small_run.loss_ratio <= 1


@given(st.lists(st.tuples(st.sampled_from(["dedicated", "crdsa3", "musca3"]), st.integers(1, 999),
                          st.floats(0, 1e9, allow_nan=False), st.floats(0, 1)), max_size=20))
def test_sweep_round_trip(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("s") / "sweep.csv"
    metrics.write_sweep(p, rows)
    assert metrics.read_sweep(p) == [(a, n, float(t), float(l)) for a, n, t, l in rows]


@given(st.lists(st.tuples(st.integers(0, 10**8), st.integers(0, 999), st.integers(1, 5000)),
                max_size=50))
def test_trace_round_trip(tmp_path_factory, trace):
    p = tmp_path_factory.mktemp("t") / "trace.csv"
    metrics.write_trace(p, trace)
    assert metrics.read_trace(p) == trace


def test_trace_time_format(tmp_path):
    metrics.write_trace(tmp_path / "t.csv", [(385_000, 0, 1)])
    assert (tmp_path / "t.csv").read_text() == "time_s,flow_id,seq_no\n0.385000,0,1\n"


def test_table_round_trip(tmp_path):
    rows = [("dedicated", 100, SessionStats(1110, 1110, 1110)), ("crdsa3", 200, SessionStats(1, 2, 3))]
    metrics.write_table(tmp_path / "t.csv", rows)
    assert metrics.read_table(tmp_path / "t.csv") == rows
    assert (tmp_path / "t.csv").read_text().startswith("access,num_sessions,min,med,max\n")


def test_header_checked(tmp_path):
    (tmp_path / "x.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        metrics.read_sweep(tmp_path / "x.csv")


def test_write_run(tmp_path):
    r = run_scenario(Scenario(access_method=DEDICATED, num_sessions=3, duration_s=2), dump_btp=True)
    paths = metrics.write_run(tmp_path, r)
    assert {p.name for p in paths} == {"summary.csv", "sessions.csv", "frames.csv", "trace.csv", "btp.csv"}
    btp = metrics.read_btp(tmp_path / "btp.csv")
    assert btp[0][0] == 13 and sum(n for k, _, n in btp if k == 13) <= 4000
    sessions = metrics.read_sessions(tmp_path / "sessions.csv")
    assert [row[1] for row in sessions] == [r.delivered_counts[i] for i in range(3)]
