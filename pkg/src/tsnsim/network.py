"""Assembles topology, streams, switches, FRER, clocks and faults into one runnable network."""

import time
from dataclasses import dataclass, field

import networkx as nx

from . import __version__
from .config import ConfigError, config_hashes, resolve
from .engine import RngStreams, Simulator
from .faults import FaultManager, FaultScriptError, load_script, recovery_time
from .frer import (FrerFunction, RedundancyConfig, RedundancyError, check_redundancy, recover,
                   replicate)
from .netmodel import RTAG_BYTES, Frame, TopologyError, load_topology, validate_topology
from .switchfabric import (BEST_EFFORT, EgressPort, ForwardingTable, StreamFilter, classify,
                           default_idle_slopes, meter_for, police)
from .timesync import TimeSync
from .traffic import StreamConfigError, StreamLog, build_streams, draw_interval, sink_receive


class ConservationError(AssertionError):
    pass


def check_config(cfg):
    """Every topology, stream, fault-script and redundancy violation in ``cfg``, as text."""
    problems = []
    try:
        topo = load_topology(cfg["topology"], window_ns=int(cfg["metrics"]["window_ns"]))
    except (TopologyError, KeyError, TypeError) as exc:
        return [f"topology: {exc}"]
    problems += [f"topology: {p}" for p in validate_topology(topo)]
    specs = []
    try:
        specs = build_streams(cfg["streams"], topo.nodes)
    except (StreamConfigError, KeyError, TypeError, ValueError) as exc:
        problems.append(f"streams: {exc}")
    try:
        load_script(cfg.get("faults"), topo)
    except (FaultScriptError, TypeError, ValueError) as exc:
        problems.append(f"faults: {exc}")
    known = {s.stream_id for s in specs}
    for entry in cfg.get("redundancy") or []:
        try:
            red = RedundancyConfig(entry["stream_id"], entry["split"], entry["merge"],
                                   entry["member_paths"])
        except (KeyError, TypeError) as exc:
            problems.append(f"redundancy: malformed entry ({exc})")
            continue
        if specs and red.stream_id not in known:
            problems.append(f"redundancy: unknown stream {red.stream_id!r}")
        problems += [f"redundancy: {p}" for p in check_redundancy(red, topo)]
    if int(cfg.get("runtime_ns", 0)) <= 0:
        problems.append("runtime_ns must be positive")
    return problems


class NodeRuntime:
    """Ingress pipeline shared by hosts and switches.

    Switches police and forward; hosts sink frames addressed to them. Either
    may host a FRER split (replication) or merge (elimination) function.
    """

    def __init__(self, net, name, is_switch, processing_ns):
        self.net = net
        self.name = name
        self.is_switch = is_switch
        self.processing_ns = processing_ns if is_switch else 0
        self.ports = {}
        self.filter = StreamFilter()
        self.split = {}
        self.merge = {}
        self.next_hops = {}
        # (stream, member) -> egress port / meter; filled from next_hops and the filter
        self.out = {}
        self.meters = {}
        self.received = 0

    def compile(self):
        self.out = {key: self.ports[nxt] for key, nxt in self.next_hops.items()}

    def _meter(self, frame, now):
        """Slow path: identify the stream from header fields and create its meter."""
        handle = classify(frame, self.filter)
        meter = None
        if handle is not BEST_EFFORT:
            meter = meter_for(self.filter, handle, frame.member_path, now)
        self.meters[frame.route_key] = meter
        return meter

    def receive(self, frame):
        net = self.net
        now = net.sim._now
        self.received += 1
        link = frame.channel.link
        if link.down_times and link.failed_between(frame.tx_start, now - self.processing_ns):
            net.drop(frame, "link-down")
            return
        if self.is_switch:
            key = frame.route_key
            meter = self.meters[key] if key in self.meters else self._meter(frame, now)
            if meter is not None and not police(meter, frame, now):
                net.drop(frame, "policer")
                return
        if self.merge and frame.frer_seq is not None:
            fn = self.merge.get(frame.stream_id)
            if fn is not None:
                if not recover(fn.recovery, frame.frer_seq, now):
                    net.eliminate(frame)
                    return
                # the survivor leaves the merge point untagged
                frame.overhead_bytes -= RTAG_BYTES
        if frame.destination == self.name:
            net.deliver(frame, now)
            return
        if not self.is_switch:
            net.drop(frame, "no-route")
            return
        self.send(frame, now, frame.channel.src)

    def land(self, frame, at):
        """Sink side of a lazily settled final hop (hosts without a merge function)."""
        self.received += 1
        if frame.destination == self.name:
            self.net.deliver(frame, at)
        else:
            self.net.drop(frame, "no-route")

    def send(self, frame, now, ingress=None):
        if self.split and frame.frer_seq is None:
            fn = self.split.get(frame.stream_id)
            if fn is not None:
                copies = replicate(frame, fn.cfg, fn.generator.take())
                self.net.logs[frame.stream_id].copies_created += len(copies) - 1
                for dup in copies:
                    self._egress(dup, now, ingress)
                return
        port = self.out.get(frame.route_key)
        if port is None or port.channel.dst == ingress:
            self.net.drop(frame, "no-route")
            return
        port.enqueue(frame, now)

    def _egress(self, frame, now, ingress):
        port = self.out.get(frame.route_key)
        if port is None or port.channel.dst == ingress:
            self.net.drop(frame, "no-route")
            return
        port.enqueue(frame, now)


@dataclass
class RunRecord:
    name: str
    seed: int
    runtime_ns: int
    config: dict
    hashes: dict
    logs: dict
    topology: object
    ports: dict
    timesync: object
    fault_window: tuple | None
    fault_log: list
    focus_stream: str | None
    redundancy: dict
    routes: dict
    recovery: dict = field(default_factory=dict)
    census: dict = field(default_factory=dict)
    events: int = 0
    wall_clock_s: float = 0.0
    tool_version: str = __version__


class Network:
    def __init__(self, cfg):
        self.cfg = cfg
        self.seed = int(cfg["seed"])
        self.runtime = int(cfg["runtime_ns"])
        self.sim = Simulator()
        self.rng = RngStreams(self.seed)
        problems = check_config(cfg)
        if problems:
            raise ConfigError(f"{len(problems)} configuration problem(s): " + "; ".join(problems),
                              problems)
        self.topo = load_topology(cfg["topology"], window_ns=int(cfg["metrics"]["window_ns"]))
        start = int(cfg["traffic"]["start_ns"])
        self.specs = build_streams(cfg["streams"], self.topo.nodes, start_at=start)
        self.spec_by_id = {s.stream_id: s for s in self.specs}
        self.logs = {s.stream_id: StreamLog(s) for s in self.specs}
        self.redundancy = self._load_redundancy(cfg.get("redundancy") or [])
        self.table = ForwardingTable()
        self._build_routes()
        self._build_nodes()
        ts = cfg["timesync"]
        self.timesync = TimeSync(self.sim, self.topo, self.rng, master=ts.get("master", "masterClock"),
                                 sync_interval_ns=ts["sync_interval_ns"],
                                 drift_ppm_bound=ts["drift_ppm_bound"],
                                 drift_enabled=ts["drift_enabled"])
        self.script = load_script(cfg.get("faults"), self.topo)
        self.faults = FaultManager(self.sim, self.topo, self.script, self.timesync, self._affected())
        for link in self.topo.links.values():
            link.watchers.append(self._on_link_state)

    # ------------------------------------------------------------ setup

    def _load_redundancy(self, entries):
        out = {}
        for entry in entries:
            sid = entry["stream_id"]
            if sid not in self.spec_by_id:
                raise RedundancyError(f"redundancy configured for unknown stream {sid!r}")
            cfg = RedundancyConfig(sid, entry["split"], entry["merge"], entry["member_paths"])
            problems = check_redundancy(cfg, self.topo)
            if problems:
                raise RedundancyError("; ".join(problems))
            self.spec_by_id[sid].redundant = True
            out[sid] = cfg
        return out

    def _switch_path(self, a, b, graph):
        if a == b:
            return [a]
        try:
            return nx.shortest_path(graph, a, b)
        except nx.NetworkXNoPath:
            return None

    def host_route(self, src, dst, graph=None):
        """src -> its uplink switch -> shortest switch path -> dst's uplink -> dst."""
        topo = self.topo
        graph = graph or self._switch_graph
        head = [src] if topo.nodes[src].is_switch else [src, topo.uplink(src)]
        tail = [dst] if topo.nodes[dst].is_switch else [topo.uplink(dst), dst]
        if None in head or None in tail:
            return None
        middle = self._switch_path(head[-1], tail[0], graph)
        if middle is None:
            return None
        return head[:-1] + middle + tail[1:]

    def _build_routes(self):
        self._switch_graph = self.topo.graph(exclude_hosts=True)
        self.routes = {}
        for spec in self.specs:
            red = self.redundancy.get(spec.stream_id)
            if red is None:
                route = self.host_route(spec.source, spec.destination)
                if route is not None:
                    self.table.add_route(spec.stream_id, None, route)
                    self.routes[(spec.stream_id, None)] = tuple(route)
                continue
            prefix = self._to_node(spec.source, red.split_node)
            suffix = self._from_node(red.merge_node, spec.destination)
            if prefix is None or suffix is None:
                raise RedundancyError(f"{spec.stream_id}: cannot reach split/merge nodes")
            self.table.add_route(spec.stream_id, None, prefix)
            self.routes[(spec.stream_id, None)] = tuple(prefix)
            for label, member in red.member_paths.items():
                full = prefix[:-1] + list(member) + suffix[1:]
                self.table.add_route(spec.stream_id, label, full)
                self.routes[(spec.stream_id, label)] = tuple(full)

    def _to_node(self, src, node):
        if src == node:
            return [src]
        topo = self.topo
        if topo.nodes[src].is_switch:
            return self._switch_path(src, node, self._switch_graph)
        path = self._switch_path(topo.uplink(src), node, self._switch_graph)
        return None if path is None else [src] + path

    def _from_node(self, node, dst):
        if node == dst:
            return [dst]
        topo = self.topo
        if topo.nodes[dst].is_switch:
            return self._switch_path(node, dst, self._switch_graph)
        path = self._switch_path(node, topo.uplink(dst), self._switch_graph)
        return None if path is None else path + [dst]

    def _port_loads(self):
        loads = {}
        for (sid, _member), route in self.routes.items():
            spec = self.spec_by_id[sid]
            for a, b in zip(route, route[1:]):
                per_class = loads.setdefault((a, b), {})
                per_class[spec.pcp] = per_class.get(spec.pcp, 0.0) + spec.nominal_rate_bps
        return loads

    def _build_nodes(self):
        cfg = self.cfg
        topo = self.topo
        sw_defaults = cfg["switch"]
        host_cap = int(cfg["host"]["queue_capacity"])
        loads = self._port_loads()
        self.nodes = {}
        for name, node in topo.nodes.items():
            sw = dict(sw_defaults, **cfg["switches"].get(name, {}))
            self.nodes[name] = NodeRuntime(self, name, node.is_switch,
                                           int(sw["processing_delay_ns"]))
        self.ports = {}
        for name, rt in self.nodes.items():
            sw = dict(sw_defaults, **cfg["switches"].get(name, {}))
            for nbr in topo.neighbors(name):
                channel = topo.channel(name, nbr)
                peer = self.nodes[nbr]
                slopes = None
                if rt.is_switch:
                    slopes = default_idle_slopes(loads.get((name, nbr), {}), channel.link.capacity_bps)
                    for pcp, bps in (sw.get("idle_slope_bps") or {}).items():
                        slopes[int(pcp)] = float(bps)
                port = EgressPort(self.sim, channel, None, self.drop,
                                  capacity=int(sw["queue_capacity"]) if rt.is_switch else host_cap,
                                  idle_slopes=slopes, rx_delay=peer.processing_ns,
                                  receiver=peer.receive)
                rt.ports[nbr] = port
                self.ports[(name, nbr)] = port
            rt.next_hops = self.table.next_hops.get(name, {})
            rt.compile()
        for spec in self.specs:
            bits = spec.frame_bytes * 8
            rate = spec.meter_rate_bps or 2.0 * spec.nominal_rate_bps
            bucket = spec.meter_bucket_bits or 4.0 * bits
            for (sid, _m), route in self.routes.items():
                if sid != spec.stream_id:
                    continue
                for hop in route:
                    rt = self.nodes[hop]
                    if rt.is_switch:
                        rt.filter.match[(spec.source, spec.destination, spec.pcp)] = sid
                        rt.filter.meter_params[sid] = (rate, bucket)
        for sid, red in self.redundancy.items():
            fn = FrerFunction(red)
            self.nodes[red.split_node].split[sid] = fn
            self.nodes[red.merge_node].merge[sid] = fn
        for (_a, b), port in self.ports.items():
            peer = self.nodes[b]
            if not peer.is_switch and not peer.merge:
                port.sink = peer.land

    def _affected(self):
        out = {}
        for (sid, _m), route in self.routes.items():
            for a, b in zip(route, route[1:]):
                key = self.topo.link(a, b).key
                bucket = out.setdefault(key, [])
                if sid not in bucket:
                    bucket.append(sid)
        return out

    # ------------------------------------------------------------ runtime

    def _on_link_state(self, link, up, t):
        if not up:
            for a, b in ((link.a, link.b), (link.b, link.a)):
                self.ports[(a, b)].link_down(t)

    def _emit(self, spec, rng, log, node):
        now = self.sim._now
        frame = Frame(spec.stream_id, spec.pcp, spec.payload_bytes, log.sent, now,
                      spec.source, spec.destination)
        log.sent += 1
        log.copies_created += 1
        node.send(frame, now)
        nxt = now + draw_interval(spec, rng)
        if nxt <= self.runtime:
            self.sim.schedule(nxt, self._emit, spec, rng, log, node)

    def drop(self, frame, reason):
        log = self.logs[frame.stream_id]
        log.drops[reason] += 1
        self._retire(frame, log)

    def eliminate(self, frame):
        log = self.logs[frame.stream_id]
        log.eliminated += 1
        self._retire(frame, log)

    def _retire(self, frame, log):
        origin = frame.origin
        origin[0] -= 1
        if origin[0] == 0 and not origin[1]:
            log.lost += 1

    def deliver(self, frame, now):
        log = self.logs[frame.stream_id]
        origin = frame.origin
        origin[0] -= 1
        origin[1] = True
        sink_receive(log, frame, now)

    def start(self):
        for spec in self.specs:
            rng = self.rng.stream(f"traffic:{spec.stream_id}")
            first = spec.start_at + draw_interval(spec, rng)
            if first <= self.runtime:
                self.sim.schedule(first, self._emit, spec, rng, self.logs[spec.stream_id],
                                  self.nodes[spec.source])
        self.timesync.start(0)
        self.faults.arm()

    def census(self):
        """Count frames still inside the network by inspecting queues and pending events."""
        copies = {sid: 0 for sid in self.logs}
        originals = {sid: set() for sid in self.logs}

        def note(frame):
            copies[frame.stream_id] += 1
            if not frame.origin[1]:
                originals[frame.stream_id].add(id(frame.origin))

        for port in self.ports.values():
            for frame in port.frames_queued():
                note(frame)
            for frame in port.frames_landing():
                note(frame)
        for ev in self.sim.pending():
            for arg in ev[3]:
                if isinstance(arg, Frame):
                    note(arg)
        return {sid: (copies[sid], len(originals[sid])) for sid in self.logs}

    def check_conservation(self, census):
        """Raise ConservationError unless every stream balances at copy and original level."""
        problems = []
        for sid, log in self.logs.items():
            copies_live, originals_live = census[sid]
            replicas = log.copies_created
            terminal = log.received + log.eliminated + sum(log.drops.values())
            if replicas != terminal + copies_live:
                problems.append(f"{sid}: copies {replicas} != terminal {terminal} + in-network {copies_live}")
            if log.sent != log.received + log.lost + originals_live:
                problems.append(f"{sid}: sent {log.sent} != received {log.received} + lost {log.lost}"
                                f" + in-flight {originals_live}")
            if log.sink_duplicates:
                problems.append(f"{sid}: {log.sink_duplicates} duplicate deliveries at the listener")
        if problems:
            raise ConservationError("; ".join(problems))

    def run(self):
        t0 = time.perf_counter()
        self.start()
        events = self.sim.run_until(self.runtime)
        for port in self.ports.values():
            if port.sink is not None:
                port.settle(self.runtime)
        self.timesync.finish(self.runtime)
        census = self.census()
        self.check_conservation(census)
        window = self.script.window()
        recovery = {}
        for spec in self.specs:
            log = self.logs[spec.stream_id]
            fs = self.faults.failure_start.get(spec.stream_id)
            if fs is None or window is None:
                recovery[spec.stream_id] = 0
            else:
                recovery[spec.stream_id] = recovery_time(log.received_at, fs, window[1],
                                                         spec.nominal_interval_ns)
        return RunRecord(
            name=self.cfg.get("name", "custom"), seed=self.seed, runtime_ns=self.runtime,
            config=self.cfg, hashes=config_hashes(self.cfg), logs=self.logs, topology=self.topo,
            ports=self.ports, timesync=self.timesync, fault_window=window,
            fault_log=list(self.faults.log), focus_stream=self.cfg.get("focus_stream"),
            redundancy=self.redundancy, routes=self.routes, recovery=recovery,
            census={sid: {"copies": c, "originals": o} for sid, (c, o) in census.items()},
            events=events, wall_clock_s=time.perf_counter() - t0)


def run_scenario(scenario, seed=None, overrides=None, window_ns=None):
    """Resolve, build and run one scenario; returns its :class:`RunRecord`."""
    extra = list(overrides or [])
    if seed is not None:
        extra.append(f"seed={int(seed)}")
    if window_ns is not None:
        extra.append(f"metrics.window_ns={int(window_ns)}")
    cfg = resolve(scenario, extra)
    return Network(cfg).run()
