import json

import pytest

from tsnsim.engine import MS, SECOND
from tsnsim.metrics import (compare_runs, export, jitter_series, latency_stats, load_run, loss_stats,
                            stream_utilization, summary, utilization)
from tsnsim.netmodel import Channel, Link
from tsnsim.traffic import StreamLog, StreamSpec


def log_with(sent, received, lost):
    log = StreamLog(StreamSpec("s", "a", "b", 6, "fixed", 1, 1))
    log.sent, log.received, log.lost = sent, received, lost
    return log


def test_loss_s1a1_counts():
    stats = loss_stats(log_with(1337, 1067, 270))
    assert stats.lost == 270
    assert stats.loss_rate == pytest.approx(0.202, abs=5e-4)


def test_loss_zero():
    assert loss_stats(log_with(75126, 75126, 0)).loss_rate == 0.0


def test_loss_undefined_when_nothing_sent():
    stats = loss_stats(log_with(0, 0, 0))
    assert stats.loss_rate == 0.0 and not stats.loss_rate_defined


def test_median_odd():
    assert latency_stats([10_000, 30_000, 20_000]).median == 20_000


def test_median_even_takes_lower_middle():
    assert latency_stats([1, 2, 3, 4]).median == 2


def test_single_delivery():
    s = latency_stats([42])
    assert s.median == s.mean == s.min == s.max == 42


def test_no_latencies():
    assert latency_stats([]) is None


def test_jitter_is_signed_difference():
    diffs, summ = jitter_series([10_000, 12_000, 11_000])
    assert diffs == [2_000, -1_000]
    assert (summ.min, summ.max) == (-1_000, 2_000)


def test_constant_latency_zero_jitter():
    diffs, summ = jitter_series([5, 5, 5, 5])
    assert diffs == [0, 0, 0] and summ.std == 0


def test_utilization_1000_bytes_in_1ms_at_100mbps():
    ch = Channel(Link("a", "b", 100_000_000), "a", "b", MS)
    ch.record_tx(0, 80_000, 8_000, "s")
    assert utilization(ch, MS).samples == [pytest.approx(0.08)]
    assert stream_utilization(ch, "s", 0, MS) == pytest.approx(0.08)


def test_utilization_zero_when_idle():
    ch = Channel(Link("a", "b", 100_000_000), "a", "b", MS)
    assert utilization(ch, 3 * MS).samples == [0.0, 0.0, 0.0]


def test_utilization_window_must_be_multiple():
    ch = Channel(Link("a", "b", 100_000_000), "a", "b", MS)
    with pytest.raises(ValueError):
        utilization(ch, 10 * MS, window=MS + 1)
    assert len(utilization(ch, 10 * MS, window=5 * MS).samples) == 2


def test_faulted_link_idle_during_outage(runs):
    rec = runs["S1A1"]
    for direction in (("SwitchA_1", "SwitchB_1"), ("SwitchB_1", "SwitchA_1")):
        series = utilization(rec.topology.channel(*direction), rec.runtime_ns)
        assert series.samples[40:60] == [0.0] * 20


def test_sensing_edge_link_matches_offered_load(runs):
    rec = runs["S1A1"]
    ch = rec.topology.channel("Sensing_1", "SwitchA_1")
    series = utilization(ch, rec.runtime_ns)
    pre_fault = series.samples[1:40]
    offered = sum(rec.logs[s].spec.nominal_rate_bps for s in ("sensor_data_1", "object_detection_1"))
    expect = offered / ch.link.capacity_bps
    assert sum(pre_fault) / len(pre_fault) == pytest.approx(expect, rel=0.15)
    assert max(pre_fault) < 0.05


def test_summary_has_table_fields(runs):
    summ = summary(runs["S1A1"])
    row = summ["streams"]["sensor_data_1"]
    assert abs(row["sent"] - 1333) <= 40
    assert row["loss_rate"] == pytest.approx(0.20, abs=0.03)
    assert abs(row["recovery_ns"] - 2 * SECOND) <= 10 * MS


def test_baseline_loses_nothing(runs):
    for sid, log in runs["baseline"].logs.items():
        assert log.lost == 0, sid


def test_export_writes_documented_files(tmp_path, runs):
    files = export(runs["S1A1"], tmp_path)
    assert sorted(p.name for p in files) == sorted(
        ["streams.csv", "links.csv", "deliveries.csv", "summary.json", "manifest.json"])
    header = (tmp_path / "streams.csv").read_text().splitlines()[0]
    assert header.startswith("stream_id,source,destination,pcp,redundant,sent,received,lost")
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["scenario"] == "S1A1" and manifest["seed"] == 42


def test_export_twice_is_identical(tmp_path, runs):
    export(runs["S1A1"], tmp_path / "a")
    export(runs["S1A1"], tmp_path / "b")
    for name in ("streams.csv", "links.csv", "deliveries.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.fixture(scope="module")
def exported(tmp_path_factory, runs):
    base = tmp_path_factory.mktemp("exports")
    out = {}
    for name in ("S1A1", "S1A2", "S2A1", "S2A2"):
        export(runs[name], base / name)
        out[name] = load_run(base / name)
    return out


def test_compare_with_itself_is_all_zero(exported):
    cmp = compare_runs(exported["S1A1"], exported["S1A1"])
    assert cmp.warnings == []
    for row in cmp.streams.values():
        for _a, _b, delta in row.values():
            assert delta in (0, None)
    assert all(ratio in (1.0, 0.0) for _a, _b, ratio in cmp.links.values())


def test_compare_s1a1_s1a2(exported):
    cmp = compare_runs(exported["S1A1"], exported["S1A2"])
    loss_a, loss_b, _ = cmp.streams["sensor_data_1"]["loss_rate"]
    assert loss_a == pytest.approx(0.20, abs=0.03) and loss_b == 0
    rec_a, rec_b, _ = cmp.streams["sensor_data_1"]["recovery_ns"]
    assert rec_a == pytest.approx(2 * SECOND, abs=10 * MS) and rec_b < MS


def test_compare_s2_replicated_ratio(exported):
    cmp = compare_runs(exported["S2A1"], exported["S2A2"])
    _a, _b, ratio = cmp.replicated["inspection_2"]
    assert ratio >= 2


def test_compare_warns_on_mismatched_streams(exported):
    other = exported["S1A2"]
    trimmed = type(other)(other.path, other.manifest, other.summary,
                          {k: v for k, v in other.streams.items() if k != "edge_logs"}, other.links)
    cmp = compare_runs(exported["S1A1"], trimmed)
    assert any("edge_logs" in w for w in cmp.warnings)
    assert "edge_logs" not in cmp.streams and "sensor_data_1" in cmp.streams


def test_load_run_needs_manifest(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_run(tmp_path)


@pytest.mark.xfail(strict=True, reason="first-copy elimination narrows jitter here; see ledger")
def test_s2a2_jitter_range_wider_than_s2a1(runs):
    def spread(name):
        _, summ = jitter_series(runs[name].logs["inspection_2"].latencies())
        return summ.max - summ.min
    assert spread("S2A2") > spread("S2A1")
