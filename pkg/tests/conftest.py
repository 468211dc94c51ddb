import pytest

from tsnsim.config import resolve
from tsnsim.engine import MS
from tsnsim.network import Network

BUNDLED = ("baseline", "S1A1", "S1A2", "S2A1", "S2A2")

# criterion number -> (passed, text); filled by test_acceptance, printed at the end
ACCEPTANCE = {}


class RunCache:
    """Each bundled scenario is simulated at most once per test session."""

    def __init__(self):
        self._records = {}

    def __getitem__(self, name):
        if name not in self._records:
            self._records[name] = Network(resolve(name)).run()
        return self._records[name]


@pytest.fixture(scope="session")
def runs():
    return RunCache()


def small_topology():
    """Two hosts, four switches: S - A, A - B direct, A - C - B detour, B - D, plus a clock master."""
    mbps100 = 100_000_000
    gbps = 1_000_000_000
    return {
        "nodes": [
            {"name": "M", "role": "clock-master"},
            {"name": "A", "role": "switch"},
            {"name": "B", "role": "switch"},
            {"name": "C", "role": "switch"},
            {"name": "S", "role": "host"},
            {"name": "D", "role": "host"},
        ],
        "links": [
            {"a": "S", "b": "A", "capacity_bps": mbps100},
            {"a": "A", "b": "B", "capacity_bps": gbps},
            {"a": "A", "b": "C", "capacity_bps": gbps},
            {"a": "C", "b": "B", "capacity_bps": gbps},
            {"a": "B", "b": "D", "capacity_bps": mbps100},
            {"a": "M", "b": "C", "capacity_bps": gbps},
        ],
    }


def small_streams(period_ns=1 * MS):
    return {"streams": [{
        "name": "flow", "source": "S", "destinations": ["D"], "pcp": 6,
        "emission": {"law": "periodic-uniform", "min_ns": period_ns // 2, "max_ns": period_ns},
        "payload_bytes": 100,
    }]}


SMALL_REDUNDANCY = [{"stream_id": "flow", "split": "A", "merge": "B",
                     "member_paths": {"direct": ["A", "B"], "detour": ["A", "C", "B"]}}]


def small_config(runtime_ns=50 * MS, faults=None, redundancy=True, seed=1, **extra):
    doc = {"name": "small", "topology": small_topology(), "streams": small_streams(),
           "runtime_ns": runtime_ns, "seed": seed, "faults": faults,
           "redundancy": SMALL_REDUNDANCY if redundancy else [],
           "traffic": {"start_ns": 0}, "focus_stream": "flow"}
    doc.update(extra)
    return resolve(doc)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {number:>2}  {text}")
