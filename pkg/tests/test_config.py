import pytest

from tsnsim.config import ConfigError, apply_override, bundled_scenarios, config_hashes, resolve
from tsnsim.network import Network, check_config

from conftest import BUNDLED


def test_bundled_names():
    assert set(bundled_scenarios()) == set(BUNDLED)


def test_bundled_configs_are_clean():
    for name in BUNDLED:
        assert check_config(resolve(name)) == [], name


def test_unknown_scenario():
    with pytest.raises(ConfigError, match="unknown scenario"):
        resolve("S9Z9")


def test_override_addresses_list_items_by_name():
    cfg = resolve("S2A1", ["streams.inspection.payload_bytes=750", "runtime_ns=1000"])
    inspection = next(s for s in cfg["streams"]["streams"] if s["name"] == "inspection")
    assert inspection["payload_bytes"] == 750
    assert cfg["runtime_ns"] == 1000


def test_override_needs_equals():
    with pytest.raises(ConfigError):
        apply_override({}, "runtime_ns")


def test_hashes_are_stable_and_sensitive():
    a, b = config_hashes(resolve("S1A1")), config_hashes(resolve("S1A1"))
    assert a == b
    c = config_hashes(resolve("S1A1", ["seed=7"]))
    assert c["topology"] == a["topology"] and c["config"] != a["config"]


def test_fault_on_unknown_link_is_reported():
    cfg = resolve("S1A1")
    cfg["faults"] = {"actions": [{"at_ns": 1, "action": "disconnect", "a": "Ghost", "b": "HMI"}]}
    assert any("unknown link" in p for p in check_config(cfg))


def test_non_disjoint_redundancy_is_reported():
    cfg = resolve("S1A2")
    cfg["redundancy"][0]["member_paths"] = {"x": ["SwitchA_1", "SwitchB_1"],
                                            "y": ["SwitchA_1", "SwitchB_1"]}
    assert any("share" in p for p in check_config(cfg))


def test_all_problems_are_collected():
    cfg = resolve("S1A2", ["runtime_ns=0"])
    cfg["faults"] = {"actions": [{"at_ns": 1, "action": "explode", "a": "SwitchA_1", "b": "SwitchB_1"}]}
    cfg["redundancy"][0]["stream_id"] = "ghost"
    problems = check_config(cfg)
    assert len(problems) == 3
    with pytest.raises(ConfigError) as err:
        Network(cfg)
    assert err.value.problems == problems


def test_bad_topology_is_reported():
    cfg = resolve("S1A1")
    cfg["topology"]["links"][0]["capacity_bps"] = 0
    problems = check_config(cfg)
    assert problems and problems[0].startswith("topology")
