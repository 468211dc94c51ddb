"""Drifting local clocks and a master-rooted sync flood over the switch tree."""

from dataclasses import dataclass

from .engine import MS, SECOND
from .netmodel import transmission_ns

SYNC_FRAME_BITS = 76 * 8
SYNC_RESIDENCE_NS = 1_000


@dataclass
class ClockState:
    drift_ppm: float = 0.0
    offset: float = 0.0          # ns, error vs. true time at last_sync_at
    last_sync_at: int = 0
    rate_correction: float = 1.0
    prev_sync_at: int | None = None
    synced: bool = False
    max_error: float = 0.0       # largest |local - true| seen so far
    syncs: int = 0

    def error_at(self, true_time):
        elapsed = true_time - self.last_sync_at
        return self.offset + self.drift_ppm * 1e-6 * elapsed * self.rate_correction


@dataclass(frozen=True)
class SyncMessage:
    master_time: int
    hop_count: int
    round: int


class TimeSync:
    """Per-node clocks plus periodic sync rounds from the clock master.

    A round starts at the master and floods hop by hop across up links. Only
    switches (and the master) relay; hosts are leaves. A node takes the first
    copy of each round, so the effective tree is the BFS tree of the links that
    are up when the round passes.
    """

    def __init__(self, sim, topo, rng_streams=None, master="masterClock",
                 sync_interval_ns=125 * MS, drift_ppm_bound=100.0, drift_enabled=True):
        self.sim = sim
        self.topo = topo
        self.master = master if master in topo.nodes else None
        self.sync_interval_ns = int(sync_interval_ns)
        self.drift_ppm_bound = float(drift_ppm_bound)
        self.clocks = {}
        self.rounds = 0
        self.messages = 0
        self._seen = {}
        for name in sorted(topo.nodes):
            drift = 0.0
            if drift_enabled and name != self.master and rng_streams is not None:
                bound = self.drift_ppm_bound
                drift = rng_streams.stream(f"drift:{name}").uniform(-bound, bound)
            self.clocks[name] = ClockState(drift_ppm=drift)

    def local_time(self, node, true_time):
        return true_time + self.clocks[node].error_at(true_time)

    def start(self, at=0):
        if self.master is None:
            return
        self.sim.schedule(at, self._periodic_round)

    def request_resync(self, t):
        """Extra round right after a repair."""
        if self.master is not None:
            self.sim.schedule(t, self._round)

    def _periodic_round(self):
        self._round()
        self.sim.schedule_in(self.sync_interval_ns, self._periodic_round)

    def _round(self):
        now = self.sim.now()
        self.rounds += 1
        rnd = self.rounds
        self._seen[rnd] = {self.master}
        if len(self.topo.nodes) <= 1:
            return
        self._relay(self.master, None, SyncMessage(now, 0, rnd))

    def _relay(self, node, came_from, msg):
        now = self.sim.now()
        for nbr, link in sorted(self.topo.neighbors(node).items()):
            if nbr == came_from or not link.up:
                continue
            delay = transmission_ns(SYNC_FRAME_BITS, link.capacity_bps) + link.propagation_ns
            self.messages += 1
            self.sim.schedule(now + delay, self._receive, nbr, node, link, now, msg)

    def _receive(self, node, came_from, link, sent_at, msg):
        if link.failed_between(sent_at, self.sim.now()):
            return
        seen = self._seen[msg.round]
        if node in seen:
            return
        seen.add(node)
        self.apply_sync(node, msg, self.sim.now())
        if self.topo.nodes[node].is_switch:
            fwd = SyncMessage(msg.master_time, msg.hop_count + 1, msg.round)
            self.sim.schedule_in(SYNC_RESIDENCE_NS, self._relay, node, came_from, fwd)

    def apply_sync(self, node, msg, arrival):
        """Phase-step the clock to the master estimate and refresh the rate ratio.

        Link and residence delays are compensated exactly, so the master
        estimate at ``arrival`` equals true time.
        """
        clock = self.clocks[node]
        err = abs(clock.error_at(arrival))
        if err > clock.max_error:
            clock.max_error = err
        if clock.synced:
            master_elapsed = arrival - clock.last_sync_at
            if master_elapsed > 0:
                local_elapsed = master_elapsed * (1 + clock.drift_ppm * 1e-6)
                clock.rate_correction = master_elapsed / local_elapsed
            clock.prev_sync_at = clock.last_sync_at
        clock.offset = 0.0
        clock.last_sync_at = arrival
        clock.synced = True
        clock.syncs += 1
        return clock

    def finish(self, t_end):
        """Fold the free-running error up to ``t_end`` into each node's maximum."""
        for clock in self.clocks.values():
            err = abs(clock.error_at(t_end))
            if err > clock.max_error:
                clock.max_error = err

    def max_offset_error(self, nodes=None):
        names = self.clocks if nodes is None else nodes
        return max((self.clocks[n].max_error for n in names), default=0.0)
