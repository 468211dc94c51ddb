"""A home-made topology and fault script, run and compared through the CLI.

Four switches in a ring carry one control flow. A scenario file written
here replicates it over both halves of the ring, and a fault script breaks
one half twice. The same file is validated, run with and without the
redundancy entry, and the two exports are compared.
"""

import json
import tempfile
from pathlib import Path

from tsnsim import cli

GBPS, MBPS100 = 1_000_000_000, 100_000_000


def scenario(redundant):
    ring = [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")]
    doc = {
        "name": "ring-frer" if redundant else "ring-plain",
        "description": "control flow across a four-switch ring, one side cut twice",
        "runtime_ns": 1_000_000_000,
        "focus_stream": "control",
        "topology": {
            "nodes": [{"name": n, "role": "switch"} for n in "ABCD"]
            + [{"name": "master", "role": "clock-master"},
               {"name": "plc", "role": "host"}, {"name": "drive", "role": "host"}],
            "links": [{"a": a, "b": b, "capacity_bps": GBPS} for a, b in ring]
            + [{"a": "master", "b": "A", "capacity_bps": MBPS100},
               {"a": "plc", "b": "A", "capacity_bps": MBPS100},
               {"a": "drive", "b": "C", "capacity_bps": MBPS100}],
        },
        "streams": {"streams": [{
            "name": "control", "source": "plc", "destinations": ["drive"], "pcp": 6,
            "emission": {"law": "periodic-uniform", "min_ns": 500_000, "max_ns": 1_000_000},
            "payload_bytes": 64}]},
        "faults": {"actions": [
            {"at_ns": 200_000_000, "action": "disconnect", "a": "A", "b": "B"},
            {"at_ns": 300_000_000, "action": "connect", "a": "A", "b": "B"},
            {"at_ns": 600_000_000, "action": "disconnect", "a": "B", "b": "C"},
            {"at_ns": 650_000_000, "action": "connect", "a": "B", "b": "C"}]},
        "switch": {"processing_delay_ns": 2_000},
    }
    if redundant:
        doc["redundancy"] = [{"stream_id": "control", "split": "A", "merge": "C",
                              "member_paths": {"east": ["A", "B", "C"], "west": ["A", "D", "C"]}}]
    return doc


def main():
    work = Path(tempfile.mkdtemp(prefix="tsnsim-ring-"))
    files = {}
    for redundant in (False, True):
        doc = scenario(redundant)
        path = work / f"{doc['name']}.json"
        path.write_text(json.dumps(doc, indent=1))
        files[doc["name"]] = path

    print("$ tsnsim validate ...")
    cli.main(["validate"] + [str(p) for p in files.values()])
    for name, path in files.items():
        print(f"\n$ tsnsim run --scenario {path.name}")
        cli.main(["run", "--scenario", str(path), "--out", str(work / name)])
    print("\n$ tsnsim compare ring-plain ring-frer")
    cli.main(["compare", str(work / "ring-plain"), str(work / "ring-frer")])
    print(f"\nexports are in {work}")


if __name__ == "__main__":
    main()
