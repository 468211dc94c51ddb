"""Topology, links and frame transmission timing."""

from bisect import bisect_left
from dataclasses import dataclass

import networkx as nx


ETH_OVERHEAD_BYTES = 46  # Ethernet + VLAN tag + IP/UDP headers
RTAG_BYTES = 6

ROLES = ("host", "switch", "clock-master")


class TopologyError(ValueError):
    pass


class Frame:
    __slots__ = (
        "stream_id", "pcp", "frer_seq", "payload_bytes", "overhead_bytes", "app_seq",
        "created_at", "source", "destination", "member_path",
        "route_key", "tx_start", "channel", "origin", "enq_at",
    )

    def __init__(self, stream_id, pcp, payload_bytes, app_seq, created_at, source, destination,
                 overhead_bytes=ETH_OVERHEAD_BYTES, frer_seq=None, member_path=None):
        if payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")
        self.stream_id = stream_id
        self.pcp = pcp
        self.frer_seq = frer_seq
        self.payload_bytes = payload_bytes
        self.overhead_bytes = overhead_bytes
        self.app_seq = app_seq
        self.created_at = created_at
        self.source = source
        self.destination = destination
        self.member_path = member_path
        # forwarding-table key, shared by all frames of one (stream, member path)
        self.route_key = (stream_id, member_path)
        self.tx_start = 0
        self.channel = None
        # [live copies, delivered] shared by every FRER member copy of one original
        self.origin = [1, False]
        self.enq_at = 0

    @property
    def bits(self):
        return (self.payload_bytes + self.overhead_bytes) * 8

    def copy(self):
        dup = Frame.__new__(Frame)
        for name in Frame.__slots__:
            setattr(dup, name, getattr(self, name))
        return dup

    def __repr__(self):
        return (f"Frame({self.stream_id}#{self.app_seq} pcp={self.pcp} seq={self.frer_seq} "
                f"member={self.member_path})")


def transmission_ns(bits, capacity_bps):
    """Serialization time in whole nanoseconds (rounded up)."""
    return -(-bits * 1_000_000_000 // capacity_bps)


@dataclass(eq=False)
class Node:
    name: str
    role: str
    cell: int | None = None
    uplink: str | None = None

    @property
    def is_switch(self):
        return self.role in ("switch", "clock-master")


class Channel:
    """One direction of a duplex link; owns the utilization record.

    Transmissions on a channel start in time order, so the counters of the
    current window are kept aside and folded into the per-window maps
    whenever the window changes (or someone reads them).
    """

    def __init__(self, link, src, dst, window_ns):
        self.link = link
        self.src = src
        self.dst = dst
        self.window_ns = window_ns
        self.frames = 0
        self._busy = {}          # window index -> busy nanoseconds
        self._bits = {}          # (stream_id, window index) -> bits started in window
        self._idx = -1
        self._idx_busy = 0
        self._idx_bits = {}      # stream_id -> bits, current window only

    @property
    def name(self):
        return f"{self.src}->{self.dst}"

    @property
    def busy_ns(self):
        self.flush()
        return self._busy

    @property
    def stream_bits(self):
        self.flush()
        return self._bits

    def flush(self):
        idx = self._idx
        if idx < 0:
            return
        if self._idx_busy:
            self._busy[idx] = self._busy.get(idx, 0) + self._idx_busy
            self._idx_busy = 0
        if self._idx_bits:
            for sid, bits in self._idx_bits.items():
                key = (sid, idx)
                self._bits[key] = self._bits.get(key, 0) + bits
            self._idx_bits = {}

    def _add_busy(self, start, end, sign=1):
        w = self.window_ns
        busy = self._busy
        while start < end:
            idx = start // w
            edge = min(end, (idx + 1) * w)
            busy[idx] = busy.get(idx, 0) + sign * (edge - start)
            start = edge

    def record_tx(self, start, end, bits, stream_id):
        self.frames += 1
        idx = start // self.window_ns
        if idx != self._idx:
            self.flush()
            self._idx = idx
        if end <= (idx + 1) * self.window_ns:
            self._idx_busy += end - start
        else:
            self._add_busy(start, end)
        cur = self._idx_bits
        cur[stream_id] = cur.get(stream_id, 0) + bits

    def truncate(self, cut, end):
        """Un-count busy time after ``cut`` for a transmission aborted by link failure."""
        if end > cut:
            self.flush()
            self._add_busy(cut, end, sign=-1)


class Link:
    """Full-duplex link between two nodes; ``down_times`` logs every failure instant."""
    __slots__ = ("a", "b", "capacity_bps", "propagation_ns", "up", "down_times", "watchers")

    def __init__(self, a, b, capacity_bps, propagation_ns=50, up=True):
        self.a = a
        self.b = b
        self.capacity_bps = capacity_bps
        self.propagation_ns = propagation_ns
        self.up = up
        self.down_times = []
        self.watchers = []

    def __repr__(self):
        return f"Link({self.a!r}, {self.b!r}, {self.capacity_bps}, up={self.up})"

    @property
    def key(self):
        return link_key(self.a, self.b)

    @property
    def name(self):
        return f"{self.a}<->{self.b}"

    def other(self, node):
        return self.b if node == self.a else self.a

    def failed_between(self, start, end):
        """True if the link went down at any instant in ``[start, end]``."""
        times = self.down_times
        if not times or times[-1] < start:
            return False
        i = bisect_left(times, start)
        return i < len(times) and times[i] <= end


def link_key(a, b):
    return (a, b) if a <= b else (b, a)


class Topology:
    def __init__(self, nodes, links, window_ns=100_000_000):
        self.nodes = {n.name: n for n in nodes}
        self.links = {}
        self.adjacency = {name: {} for name in self.nodes}
        self.channels = {}
        self.window_ns = window_ns
        for link in links:
            self.links[link.key] = link
            self.adjacency.setdefault(link.a, {})[link.b] = link
            self.adjacency.setdefault(link.b, {})[link.a] = link
            self.channels[(link.a, link.b)] = Channel(link, link.a, link.b, window_ns)
            self.channels[(link.b, link.a)] = Channel(link, link.b, link.a, window_ns)

    def link(self, a, b):
        try:
            return self.links[link_key(a, b)]
        except KeyError:
            raise TopologyError(f"no link between {a} and {b}") from None

    def channel(self, src, dst):
        return self.channels[(src, dst)]

    def neighbors(self, name):
        return self.adjacency.get(name, {})

    def uplink(self, name):
        """Primary attachment switch of a host (first listed link unless configured)."""
        node = self.nodes[name]
        if node.uplink:
            return node.uplink
        nbrs = self.neighbors(name)
        return next(iter(nbrs)) if nbrs else None

    def graph(self, only_up=False, exclude_hosts=False):
        g = nx.Graph()
        for name, node in self.nodes.items():
            if exclude_hosts and not node.is_switch:
                continue
            g.add_node(name)
        for link in self.links.values():
            if only_up and not link.up:
                continue
            if link.a in g and link.b in g:
                g.add_edge(link.a, link.b)
        return g

    def link_states(self):
        return {link.name: link.up for link in self.links.values()}


def load_topology(document, window_ns=100_000_000):
    """Build a :class:`Topology` from a ``{"nodes": [...], "links": [...]}`` document."""
    if not isinstance(document, dict) or "nodes" not in document:
        raise TopologyError("topology document needs a 'nodes' list")
    nodes = []
    seen = set()
    for entry in document["nodes"]:
        name = entry["name"]
        if name in seen:
            raise TopologyError(f"duplicate node name {name!r}")
        seen.add(name)
        role = entry.get("role", "host")
        if role not in ROLES:
            raise TopologyError(f"node {name!r}: unknown role {role!r}")
        nodes.append(Node(name, role, entry.get("cell"), entry.get("uplink")))
    links = []
    seen_links = set()
    for entry in document.get("links", []):
        a, b = entry["a"], entry["b"]
        for end in (a, b):
            if end not in seen:
                raise TopologyError(f"link {a}<->{b} references unknown node {end!r}")
        if a == b:
            raise TopologyError(f"self-loop on {a!r}")
        if link_key(a, b) in seen_links:
            raise TopologyError(f"duplicate link {a}<->{b}")
        seen_links.add(link_key(a, b))
        capacity = entry["capacity_bps"]
        if capacity <= 0:
            raise TopologyError(f"link {a}<->{b}: capacity must be positive")
        links.append(Link(a, b, int(capacity), int(entry.get("propagation_ns", 50))))
    for node in nodes:
        if node.uplink is not None and node.uplink not in seen:
            raise TopologyError(f"node {node.name!r}: uplink {node.uplink!r} is not a node")
    return Topology(nodes, links, window_ns)


def validate_topology(topo):
    """Return a list of human-readable invariant violations (empty when valid)."""
    problems = []
    for link in topo.links.values():
        if link.capacity_bps <= 0:
            problems.append(f"link {link.name} has non-positive capacity")
        if link.propagation_ns < 0:
            problems.append(f"link {link.name} has negative propagation delay")
    for name, node in topo.nodes.items():
        switches = [n for n in topo.neighbors(name) if topo.nodes[n].is_switch]
        if node.role == "host":
            if not switches:
                problems.append(f"{name} is isolated (no switch attachment)")
            elif node.cell is not None and len(switches) < 2:
                problems.append(f"{name} not dual-homed")
            if node.uplink is not None and node.uplink not in topo.neighbors(name):
                problems.append(f"{name} uplink {node.uplink} is not an attached switch")
    g = topo.graph()
    if g.number_of_nodes() > 1 and not nx.is_connected(g):
        parts = sorted(sorted(c) for c in nx.connected_components(g))
        problems.append(f"topology is not connected ({len(parts)} components)")
    return problems


def transmit(frame, channel, t_start):
    """Delivery time of ``frame`` sent on ``channel`` at ``t_start``, or None if the link is down.

    Books the frame's bits against the channel's utilization record.
    """
    link = channel.link
    if not link.up:
        return None
    t_end = t_start + transmission_ns(frame.bits, link.capacity_bps)
    channel.record_tx(t_start, t_end, frame.bits, frame.stream_id)
    return t_end + link.propagation_ns


def set_link_state(link, up, t):
    """Change link state at time ``t``; idempotent. Watchers fire only on real transitions."""
    if link.up == up:
        return False
    link.up = up
    if not up:
        link.down_times.append(t)
    for watcher in link.watchers:
        watcher(link, up, t)
    return True
