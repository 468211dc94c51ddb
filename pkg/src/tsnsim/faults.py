"""Timed link disconnect/connect scripts and recovery-time measurement."""

from bisect import bisect_left
from dataclasses import dataclass, field

from .netmodel import link_key, set_link_state

ACTIONS = ("disconnect", "connect")


class FaultScriptError(ValueError):
    pass


@dataclass(frozen=True)
class FaultAction:
    at: int
    action: str
    endpoint_a: str
    endpoint_b: str

    @property
    def link(self):
        return link_key(self.endpoint_a, self.endpoint_b)


@dataclass
class FaultScript:
    actions: list = field(default_factory=list)
    name: str = ""

    def window(self):
        """(first disconnect, last connect) or None for a fault-free script."""
        downs = [a.at for a in self.actions if a.action == "disconnect"]
        if not downs:
            return None
        ups = [a.at for a in self.actions if a.action == "connect"]
        return min(downs), (max(ups) if ups else None)

    def reversed(self, at):
        """Complementary script that undoes every action, all at time ``at``."""
        flip = {"disconnect": "connect", "connect": "disconnect"}
        return FaultScript([FaultAction(at, flip[a.action], a.endpoint_a, a.endpoint_b)
                            for a in reversed(self.actions)], f"{self.name}-reversed")


def load_script(document, topo=None):
    """Parse ``{"actions": [{"at_ns", "action", "a", "b"}, ...]}`` into a validated script."""
    if document is None:
        return FaultScript()
    actions = []
    prev = None
    for i, entry in enumerate(document.get("actions", [])):
        try:
            at = int(entry["at_ns"])
            kind = entry["action"]
            a, b = entry["a"], entry["b"]
        except KeyError as exc:
            raise FaultScriptError(f"action #{i}: missing field {exc}") from None
        if kind not in ACTIONS:
            raise FaultScriptError(f"action #{i}: unknown action {kind!r}")
        if at < 0:
            raise FaultScriptError(f"action #{i}: negative time")
        if prev is not None and at < prev:
            raise FaultScriptError(f"action #{i}: times must be nondecreasing")
        if topo is not None and link_key(a, b) not in topo.links:
            raise FaultScriptError(f"action #{i}: unknown link {a}<->{b}")
        prev = at
        actions.append(FaultAction(at, kind, a, b))
    return FaultScript(actions, document.get("name", ""))


class FaultManager:
    """Applies a script to a live network and keeps the failure log."""

    def __init__(self, sim, topo, script, timesync=None, affected=None):
        self.sim = sim
        self.topo = topo
        self.script = script
        self.timesync = timesync
        # link key -> stream ids whose configured routes cross it
        self.affected = affected or {}
        self.failure_start = {}
        self.log = []

    def arm(self):
        for action in self.script.actions:
            self.sim.schedule(action.at, self.apply_action, action)

    def apply_action(self, action, t=None):
        t = self.sim.now() if t is None else t
        link = self.topo.link(action.endpoint_a, action.endpoint_b)
        up = action.action == "connect"
        changed = set_link_state(link, up, t)
        self.log.append((t, action.action, link.name, changed))
        if not changed:
            return
        if not up:
            for sid in self.affected.get(link.key, ()):
                self.failure_start.setdefault(sid, t)
        elif self.timesync is not None:
            self.timesync.request_resync(t)


def recovery_time(delivery_times, fault_start, fault_end, nominal_interval):
    """Largest inter-delivery gap touching the fault window, minus the nominal interval.

    The window is ``[fault_start, fault_end + 2 * nominal_interval]``; the gap
    that straddles ``fault_start`` counts. Returns 0 when delivery never
    stalled beyond the nominal interval and None when nothing was delivered
    after the fault began.
    """
    times = sorted(delivery_times)
    if fault_end is None:
        fault_end = fault_start
    window_end = fault_end + 2 * nominal_interval
    i = bisect_left(times, fault_start)
    if i >= len(times):
        return None
    gap = times[0] - fault_start if i == 0 else 0
    for k in range(max(0, i - 1), len(times) - 1):
        a, b = times[k], times[k + 1]
        if a > window_end:
            break
        if b - a > gap:
            gap = b - a
    return max(0, gap - nominal_interval)
