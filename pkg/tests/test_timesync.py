import pytest

from tsnsim.engine import MS, SECOND, RngStreams, Simulator
from tsnsim.netmodel import load_topology, set_link_state
from tsnsim.timesync import ClockState, SyncMessage, TimeSync

CHAIN = {
    "nodes": [{"name": "masterClock", "role": "clock-master"},
              {"name": "sw1", "role": "switch"},
              {"name": "sw2", "role": "switch"},
              {"name": "h", "role": "host"}],
    "links": [{"a": "masterClock", "b": "sw1", "capacity_bps": 1_000_000_000},
              {"a": "sw1", "b": "sw2", "capacity_bps": 1_000_000_000},
              {"a": "sw2", "b": "h", "capacity_bps": 100_000_000}],
}


def chain_sync(drift=True, seed=7):
    sim = Simulator()
    topo = load_topology(CHAIN)
    ts = TimeSync(sim, topo, RngStreams(seed), drift_enabled=drift)
    return sim, topo, ts


def test_zero_drift_zero_offset_is_identity():
    clock = ClockState()
    assert clock.error_at(5 * SECOND) == 0


def test_free_running_drift_100ppm_one_second():
    clock = ClockState(drift_ppm=100.0)
    assert clock.error_at(SECOND) == pytest.approx(100_000)


def test_apply_sync_resets_offset():
    sim, topo, ts = chain_sync()
    ts.clocks["sw1"].offset = 12_000
    ts.apply_sync("sw1", SyncMessage(0, 0, 1), 500)
    assert ts.clocks["sw1"].error_at(500) == 0
    assert ts.local_time("sw1", 500) == 500


def test_two_syncs_estimate_rate_ratio():
    sim, topo, ts = chain_sync()
    clock = ts.clocks["sw1"]
    clock.drift_ppm = 100.0
    ts.apply_sync("sw1", SyncMessage(0, 0, 1), 0)
    ts.apply_sync("sw1", SyncMessage(0, 0, 2), 125 * MS)
    assert clock.rate_correction == pytest.approx(1 / (1 + 1e-4))


def test_zero_drift_rate_ratio_is_one():
    sim, topo, ts = chain_sync(drift=False)
    ts.apply_sync("sw2", SyncMessage(0, 0, 1), 0)
    ts.apply_sync("sw2", SyncMessage(0, 0, 2), 125 * MS)
    assert ts.clocks["sw2"].rate_correction == 1.0


def test_one_second_gives_eight_rounds():
    sim, topo, ts = chain_sync()
    ts.start(0)
    sim.run_until(SECOND - 1)
    assert ts.rounds == 8


def test_every_node_hears_every_round():
    sim, topo, ts = chain_sync()
    ts.start(0)
    sim.run_until(SECOND - 1)
    for name in ("sw1", "sw2", "h"):
        assert ts.clocks[name].syncs == 8


def test_no_drift_means_no_error():
    sim, topo, ts = chain_sync(drift=False)
    ts.start(0)
    sim.run_until(SECOND)
    ts.finish(SECOND)
    assert ts.max_offset_error() == 0


def test_error_between_syncs_is_bounded_by_drift_times_interval():
    sim, topo, ts = chain_sync()
    ts.start(0)
    sim.run_until(2 * SECOND)
    ts.finish(2 * SECOND)
    assert ts.max_offset_error() <= 100e-6 * 125 * MS + 100


def test_isolated_node_runs_free():
    sim, topo, ts = chain_sync()
    ts.clocks["sw2"].drift_ppm = 100.0
    ts.start(0)
    sim.schedule(SECOND, set_link_state, topo.link("sw1", "sw2"), False, SECOND)
    sim.schedule(3 * SECOND, set_link_state, topo.link("sw1", "sw2"), True, 3 * SECOND)
    sim.run_until(3 * SECOND - 1)
    # last sync heard at or before 1 s, then 2 s free-running at 100 ppm
    assert ts.clocks["sw2"].error_at(3 * SECOND) >= 200_000 * 0.99
    sim.schedule(3 * SECOND, ts.request_resync, 3 * SECOND)
    sim.run_until(3 * SECOND + MS)
    assert ts.clocks["sw2"].max_error >= 200_000 * 0.99
    assert abs(ts.clocks["sw2"].error_at(sim.now())) < 1_000


def test_single_node_topology_sends_nothing():
    sim = Simulator()
    topo = load_topology({"nodes": [{"name": "masterClock", "role": "clock-master"}], "links": []})
    ts = TimeSync(sim, topo, RngStreams(1))
    ts.start(0)
    sim.run_until(SECOND)
    assert ts.messages == 0


def test_drift_draws_within_bound():
    sim, topo, ts = chain_sync()
    for name, clock in ts.clocks.items():
        assert abs(clock.drift_ppm) <= 100.0
    assert ts.clocks["masterClock"].drift_ppm == 0.0
