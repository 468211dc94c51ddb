import json

import pytest

from tsnsim import cli

SHORT = ["--set", "runtime_ns=300000000"]


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_list_scenarios(capsys):
    code, out, _ = run(["list-scenarios"], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 5
    for line in lines:
        if line.startswith(("S1A2", "S2A2")):
            assert "FRER" in line


def test_list_scenarios_json(capsys):
    code, out, _ = run(["list-scenarios", "--json"], capsys)
    entries = json.loads(out)
    assert [e["name"] for e in entries] == ["baseline", "S1A1", "S1A2", "S2A1", "S2A2"]


def test_validate_bundled(capsys):
    code, out, _ = run(["validate"], capsys)
    assert code == 0 and out.count(": ok") == 5


def write_bad(tmp_path):
    bad = {"name": "bad", "topology": "topologies/in2c.json", "streams": "streams/in2c.json",
           "faults": {"actions": [{"at_ns": 1, "action": "disconnect", "a": "Ghost", "b": "HMI"}]},
           "redundancy": [{"stream_id": "sensor_data_1", "split": "SwitchA_1", "merge": "SwitchB_1",
                           "member_paths": {"x": ["SwitchA_1", "SwitchB_1"],
                                            "y": ["SwitchA_1", "SwitchB_1"]}}]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    return path


def test_validate_reports_every_violation(tmp_path, capsys):
    code, out, _ = run(["validate", str(write_bad(tmp_path))], capsys)
    assert code == cli.EXIT_CONFIG
    assert "unknown link" in out and "share link" in out


def test_run_with_bad_config_exits_config_error(tmp_path, capsys):
    code, _, err = run(["run", "--scenario", str(write_bad(tmp_path)), "--out", str(tmp_path / "o")],
                       capsys)
    assert code == cli.EXIT_CONFIG
    assert "unknown link" in err


def test_run_with_bad_topology(tmp_path, capsys):
    code, _, err = run(["run", "--scenario", "S1A1", "--out", str(tmp_path),
                        "--set", "topology.links.0.capacity_bps=0"], capsys)
    assert code == cli.EXIT_CONFIG
    assert "capacity" in err


def test_run_writes_exports(tmp_path, capsys):
    code, out, _ = run(["run", "--scenario", "S1A2", "--out", str(tmp_path)] + SHORT, capsys)
    assert code == 0
    assert (tmp_path / "streams.csv").exists() and (tmp_path / "manifest.json").exists()
    assert "sensor_data_1" in out


def test_same_seed_same_bytes(tmp_path, capsys):
    for name in ("a", "b"):
        assert run(["run", "--scenario", "S1A1", "--seed", "5", "--out", str(tmp_path / name)] + SHORT,
                   capsys)[0] == 0
    for f in ("streams.csv", "links.csv", "deliveries.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_batch_uses_separate_directories(tmp_path, capsys):
    code, _, _ = run(["run", "--scenario", "S1A1", "--scenario", "S1A2", "--seed", "1", "--seed", "2",
                      "--jobs", "2", "--out", str(tmp_path)] + SHORT, capsys)
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "S1A1_seed1", "S1A1_seed2", "S1A2_seed1", "S1A2_seed2"]


def test_default_out_comes_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    assert run(["run", "--scenario", "S1A1"] + SHORT, capsys)[0] == 0
    assert (tmp_path / "S1A1_seed42" / "streams.csv").exists()


def test_config_file_out_dir_and_flag_precedence(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    scenario = tmp_path / "mine.json"
    scenario.write_text(json.dumps({"name": "mine", "topology": "topologies/in2c.json",
                                    "streams": "streams/in2c.json", "runtime_ns": 100000000,
                                    "out_dir": str(tmp_path / "cfg")}))
    assert run(["run", "--scenario", str(scenario)], capsys)[0] == 0
    assert (tmp_path / "cfg" / "mine_seed42").is_dir()
    assert run(["run", "--scenario", str(scenario), "--out", str(tmp_path / "flag")], capsys)[0] == 0
    assert (tmp_path / "flag" / "streams.csv").exists()
    assert not (tmp_path / "env").exists()


def test_runtime_failure_exit_code(tmp_path, capsys, monkeypatch):
    class Broken:
        def __init__(self, cfg):
            pass

        def run(self):
            raise AssertionError("accounting mismatch")

    monkeypatch.setattr(cli, "Network", Broken)
    code, _, err = run(["run", "--scenario", "S1A1", "--out", str(tmp_path)], capsys)
    assert code == cli.EXIT_RUNTIME and "accounting mismatch" in err


def test_compare_itself_and_missing_manifest(tmp_path, capsys):
    run(["run", "--scenario", "S1A1", "--out", str(tmp_path / "a")] + SHORT, capsys)
    code, out, _ = run(["compare", str(tmp_path / "a"), str(tmp_path / "a")], capsys)
    assert code == 0 and "warning" not in out
    assert "+0.00%" in out
    assert run(["compare", str(tmp_path), str(tmp_path / "a")], capsys)[0] == cli.EXIT_CONFIG


def test_usage_error():
    with pytest.raises(SystemExit) as err:
        cli.main(["frobnicate"])
    assert err.value.code == 2
