import pytest

from tsnsim.engine import MS, SECOND
from tsnsim.network import ConservationError, Network, run_scenario

from conftest import small_config


def test_s1_run_reaches_end_with_enough_events(runs):
    rec = runs["S1A1"]
    assert rec.runtime_ns == 10 * SECOND
    assert rec.events > 2_600


def test_small_network_delivers_everything_once():
    rec = Network(small_config()).run()
    log = rec.logs["flow"]
    assert log.sent > 40
    assert log.received == log.sent and log.eliminated == log.sent
    assert log.sink_duplicates == 0


def test_without_redundancy_a_cut_loses_frames():
    faults = {"actions": [{"at_ns": 10 * MS, "action": "disconnect", "a": "A", "b": "B"},
                          {"at_ns": 30 * MS, "action": "connect", "a": "A", "b": "B"}]}
    rec = Network(small_config(faults=faults, redundancy=False)).run()
    log = rec.logs["flow"]
    assert 0 < log.lost < log.sent
    assert log.lost == sum(log.drops.values())


def test_tampered_counts_fail_the_run():
    net = Network(small_config())
    net.logs["flow"].sent += 1
    with pytest.raises(ConservationError):
        net.run()


def test_in_flight_frames_are_not_lost():
    # stop mid-transmission: whatever is still in the network is in flight, not lost
    rec = Network(small_config(runtime_ns=5 * MS + 7_000)).run()
    log = rec.logs["flow"]
    in_flight = rec.census["flow"]["originals"]
    assert log.sent == log.received + log.lost + in_flight
    assert log.lost == 0


def test_seed_changes_the_run():
    a = run_scenario("S1A1", seed=1, overrides=["runtime_ns=300000000"])
    b = run_scenario("S1A1", seed=2, overrides=["runtime_ns=300000000"])
    assert a.logs["sensor_data_1"].sent_at != b.logs["sensor_data_1"].sent_at


def test_window_override():
    rec = run_scenario("S1A1", overrides=["runtime_ns=200000000"], window_ns=10 * MS)
    assert rec.topology.window_ns == 10 * MS
