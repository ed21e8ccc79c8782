import math

import pytest
from hypothesis import given, strategies as st

from satlink.config import (CRDSA3, DEDICATED, MUSCA3, SCENARIO_KEYS, AccessMethod, ConfigError,
                            Datagram, LinkConfig, Scenario, default_config, load_scenario,
                            parse_scenario, validate)


def test_default_geometry():
    c = default_config()
    assert c.total_slots == 4000
    assert c.frame_us == 45_000
    assert c.rtt == pytest.approx(0.5)
    assert validate(c) == []


def test_validate_lists_every_violation():
    errors = validate(LinkConfig(carriers=0, random_margin=-1.0))
    assert any("carriers" in e for e in errors)
    assert len(errors) >= 2


def test_block_size_must_divide_frame():
    errors = validate(LinkConfig(ra_block_slots=3000))
    assert errors == ["ra_block_slots=3000 is not a divisor of total slots per frame (4000)"]


@pytest.mark.parametrize("text,expected", [
    ("dedicated", DEDICATED), ("CRDSA3", CRDSA3), ("musca3", MUSCA3),
    ("musca4", AccessMethod("musca", 4)),
])
def test_parse_access(text, expected):
    assert AccessMethod.parse(text) == expected


@pytest.mark.parametrize("text", ["aloha", "crdsa1", "musca", ""])
def test_parse_access_rejects(text):
    with pytest.raises(ConfigError):
        AccessMethod.parse(text)


def test_access_names():
    assert [m.name for m in (DEDICATED, CRDSA3, MUSCA3)] == ["dedicated", "crdsa3", "musca3"]
    assert not DEDICATED.is_random and CRDSA3.is_random


def test_datagram_remaining():
    d = Datagram(0, 1)
    assert d.remaining == 1500
    assert d.packets_left(920) == 14
    assert d.packets_left(680) == 18
    assert d.packets_left(613) == 20


def test_parse_scenario_comments_and_units():
    s = parse_scenario("""
        # a comment
        access_method = musca3   # trailing
        num_sessions = 200
        frame_ms = 45
        one_way_delay_ms = 250
        seq_threshold = inf
    """)
    assert s.access_method == MUSCA3
    assert s.num_sessions == 200
    assert s.config.frame_duration == pytest.approx(0.045)
    assert math.isinf(s.seq_threshold)


def test_parse_scenario_reports_all_errors():
    with pytest.raises(ConfigError) as exc:
        parse_scenario("bogus = 1\nnum_sessions = many\nnot a pair\n")
    assert len(exc.value.errors) == 3


def test_scenario_validation():
    errors = Scenario(num_sessions=0, duration_s=-1, loss_model="table").validate()
    assert "num_sessions must be positive" in errors
    assert "duration_s must be positive" in errors
    assert "loss_model = table requires plr_table" in errors
    assert Scenario(policy="random").validate()  # random policy with dedicated access
    with pytest.raises(ConfigError):
        Scenario(num_sessions=-1).check()


def test_num_frames():
    assert Scenario().num_frames == 444


def test_replace_routes_config_fields():
    s = Scenario().replace(carriers=50, num_sessions=3)
    assert s.config.carriers == 50 and s.num_sessions == 3
    assert Scenario().config.carriers == 100


def test_load_scenario_resolves_relative_table(tmp_path):
    (tmp_path / "s.cfg").write_text("loss_model = table\nplr_table = curve.csv\naccess_method = crdsa3\n")
    s = load_scenario(tmp_path / "s.cfg")
    assert s.plr_table == str(tmp_path / "curve.csv")


def test_all_keys_round_trip():
    s = Scenario(access_method=MUSCA3, policy="hybrid", seq_threshold=12, ra_block_budget=5,
                 flow_bytes=30000, info_bits=594, min_clean_bursts=2, plr_table="x.csv",
                 initial_cwnd=4)
    keys = {k for k, _ in s.to_items()}
    assert keys == set(SCENARIO_KEYS)
    assert parse_scenario(s.dumps()) == s


@given(sessions=st.integers(1, 1000), seed=st.integers(0, 2**64 - 1),
       duration=st.floats(0.05, 100, allow_nan=False),
       access=st.sampled_from([DEDICATED, CRDSA3, MUSCA3]),
       delay=st.integers(0, 400))
def test_dumps_round_trip(sessions, seed, duration, access, delay):
    s = Scenario(num_sessions=sessions, seed=seed, duration_s=duration, access_method=access)
    s = s.replace(one_way_delay=delay / 1e3)
    assert parse_scenario(s.dumps()) == s


def test_infinite_threshold_round_trip():
    s = Scenario(access_method=MUSCA3, policy="hybrid", seq_threshold=math.inf)
    assert "seq_threshold = inf" in s.dumps()
    assert parse_scenario(s.dumps()) == s
