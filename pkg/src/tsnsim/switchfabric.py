"""TSN switch data plane: classification, token-bucket policing, CBS-shaped egress queues."""

import math
from collections import deque
from heapq import heappush
from dataclasses import dataclass, field

from .netmodel import transmission_ns

BEST_EFFORT = "best-effort"
DEFAULT_QUEUE_CAPACITY = 100
DEFAULT_PROCESSING_NS = 1_000
MIN_IDLE_FRACTION = 0.10
IDLE_SLOPE_HEADROOM = 2.0


# ---------------------------------------------------------------- filtering

class Meter:
    """Token bucket in bits. Starts full."""
    __slots__ = ("rate_bps", "bucket_bits", "tokens", "last", "drops")

    def __init__(self, rate_bps, bucket_bits, tokens=None, last=0):
        self.rate_bps = float(rate_bps)
        self.bucket_bits = float(bucket_bits)
        self.tokens = self.bucket_bits if tokens is None else float(tokens)
        self.last = last
        self.drops = 0

    def __repr__(self):
        return f"Meter(rate={self.rate_bps:.0f}bps, bucket={self.bucket_bits:.0f}b, tokens={self.tokens:.0f})"


def police(meter, frame, t):
    tokens = meter.tokens + meter.rate_bps * (t - meter.last) / 1e9
    if tokens > meter.bucket_bits:
        tokens = meter.bucket_bits
    meter.last = t
    bits = (frame.payload_bytes + frame.overhead_bytes) * 8
    if tokens >= bits:
        meter.tokens = tokens - bits
        return True
    meter.tokens = tokens
    meter.drops += 1
    return False


@dataclass
class StreamFilter:
    """Per-switch stream identification table plus one meter per (stream, member)."""
    match: dict = field(default_factory=dict)    # (source, destination, pcp) -> stream id
    meters: dict = field(default_factory=dict)   # (stream id, member path) -> Meter
    meter_params: dict = field(default_factory=dict)  # stream id -> (rate, bucket)


def classify(frame, flt):
    return flt.match.get((frame.source, frame.destination, frame.pcp), BEST_EFFORT)


def meter_for(flt, handle, member, t):
    key = (handle, member)
    meter = flt.meters.get(key)
    if meter is None:
        params = flt.meter_params.get(handle)
        if params is None:
            return None
        meter = flt.meters[key] = Meter(params[0], params[1], last=t)
    return meter


# ---------------------------------------------------------------- shaping

class ClassQueue:
    """FIFO of one traffic class plus its credit-based shaper state.

    ``idle_slope=None`` makes the class unshaped. ``tx_end`` is the end of the
    class's current transmission, or -1 when it is not transmitting.
    """
    __slots__ = ("pcp", "frames", "capacity", "shaped", "idle_slope", "send_slope", "credit",
                 "last", "tx_end", "overflow")

    def __init__(self, pcp, capacity=DEFAULT_QUEUE_CAPACITY, idle_slope=None, link_rate=None):
        self.pcp = pcp
        self.frames = []
        self.capacity = capacity
        self.shaped = idle_slope is not None
        self.idle_slope = float(idle_slope) if self.shaped else 0.0
        self.send_slope = self.idle_slope - link_rate if self.shaped else 0.0
        self.credit = 0.0
        self.last = 0
        self.tx_end = -1
        self.overflow = 0

    def update(self, now):
        """Bring credit up to ``now``, closing out a finished transmission on the way."""
        te = self.tx_end
        if te >= 0:
            cbs_update(self, now if now < te else te, True)
            if now < te:
                return self.credit
            self.tx_end = -1
        return cbs_update(self, now, False)


def cbs_update(queue, now, transmitting):
    """Advance one class's credit from ``queue.last`` to ``now`` under a fixed state.

    Credit grows at idle_slope while frames wait (or while it is negative),
    drains at send_slope while this class transmits, and snaps from positive to
    zero once the queue is empty.
    """
    dt = now - queue.last
    if queue.shaped:
        if dt > 0:
            if transmitting:
                queue.credit += queue.send_slope * dt / 1e9
            elif queue.frames:
                queue.credit += queue.idle_slope * dt / 1e9
            elif queue.credit < 0:
                queue.credit = min(0.0, queue.credit + queue.idle_slope * dt / 1e9)
        if not transmitting and not queue.frames and queue.credit > 0:
            queue.credit = 0.0
    queue.last = now
    return queue.credit


class GateSchedule:
    """Cyclic per-class gate list; ``None`` entries list means always open."""

    def __init__(self, entries=None, cycle_ns=None):
        # entries: list of (duration_ns, set of open pcps)
        self.entries = entries
        self.cycle_ns = cycle_ns or (sum(d for d, _ in entries) if entries else None)

    def is_open(self, pcp, t):
        if not self.entries:
            return True
        pos = t % self.cycle_ns
        for duration, open_set in self.entries:
            if pos < duration:
                return pcp in open_set
            pos -= duration
        return False


ALWAYS_OPEN = GateSchedule()


class EgressPort:
    """Transmit side of one channel with eight strict-priority class queues.

    ``idle_slopes`` maps pcp -> bits/s for CBS-shaped classes; classes absent
    from it are unshaped. Transmission is non-preemptive.
    """

    def __init__(self, sim, channel, deliver, on_drop, capacity=DEFAULT_QUEUE_CAPACITY,
                 idle_slopes=None, gate=None, rx_delay=0, receiver=None):
        self.sim = sim
        self.channel = channel
        self.link = channel.link
        self.rate = channel.link.capacity_bps
        self.deliver = deliver
        # with a receiver, arrivals go straight onto the event heap (hot path)
        self.receiver = receiver
        # final hop into a pure sink: arrivals wait here and are settled lazily
        # (see settle) instead of costing one event each
        self.sink = None
        self.landing = deque()
        self._heap = sim._heap
        self.on_drop = on_drop
        self.capacity = capacity
        self.idle_slopes = dict(idle_slopes or {})
        self.gate = gate if gate is not None and gate.entries else None
        self.rx_delay = rx_delay
        self.arrival_delay = channel.link.propagation_ns + rx_delay
        self.classes = {}
        self.order = []
        self.shaped = bool(self.idle_slopes)
        self.busy_until = 0
        self.current = None
        self.queued = 0
        self._busy_wake = False
        self._credit_wake_at = None
        self.audit = None
        self.enqueued = 0
        self.wait_total = 0
        self.wait_max = 0
        self.dispatched = 0

    def queue(self, pcp):
        q = self.classes.get(pcp)
        if q is None:
            q = ClassQueue(pcp, self.capacity, self.idle_slopes.get(pcp), self.rate)
            q.last = self.sim.now()
            self.classes[pcp] = q
            self.order = sorted(self.classes.values(), key=lambda c: -c.pcp)
        return q

    def backlog(self):
        return sum(len(q.frames) for q in self.order)

    def enqueue(self, frame, now):
        if not self.link.up:
            self.on_drop(frame, "link-down")
            return False
        q = self.classes.get(frame.pcp) or self.queue(frame.pcp)
        frames = q.frames
        if len(frames) >= q.capacity:
            q.overflow += 1
            self.on_drop(frame, "overflow")
            return False
        # credit of one class depends only on its own queue and transmission
        # state, so only the class whose state changes needs bringing up to date
        if q.shaped:
            q.update(now)
        frame.enq_at = now
        frames.append(frame)
        self.queued += 1
        self.enqueued += 1
        if now >= self.busy_until:
            self._try_send(now)
        elif not self._busy_wake:
            self._busy_wake = True
            heappush(self._heap, (self.busy_until, self.sim.next_seq(), self._on_busy_end, ()))
        return True

    def select_next(self, now):
        """Highest-PCP class whose gate is open, queue nonempty and credit >= 0."""
        gate = self.gate
        for q in self.order:
            if q.frames and (not q.shaped or q.update(now) >= 0):
                if gate is None or gate.is_open(q.pcp, now):
                    return q
        return None

    def _try_send(self, now):
        if self.queued == 0:
            return None
        q = self.select_next(now)
        if q is None:
            self._arm_credit_wake(now)
            return None
        if self.audit is not None:
            self.audit(self, q, now)
        frame = q.frames.pop(0)
        self.queued -= 1
        wait = now - frame.enq_at
        self.wait_total += wait
        if wait > self.wait_max:
            self.wait_max = wait
        self.dispatched += 1
        channel = self.channel
        bits = (frame.payload_bytes + frame.overhead_bytes) * 8
        te = now + transmission_ns(bits, self.rate)
        channel.record_tx(now, te, bits, frame.stream_id)
        if q.shaped:
            q.tx_end = te
        self.busy_until = te
        self.current = q
        frame.tx_start = now
        frame.channel = channel
        if self.sink is not None:
            if self.landing:
                self.settle(now)
            self.landing.append((te + self.arrival_delay, frame))
        elif self.receiver is not None:
            heappush(self._heap, (te + self.arrival_delay, self.sim.next_seq(), self.receiver, (frame,)))
        else:
            self.deliver(frame, te + self.arrival_delay)
        if self.queued:
            self._busy_wake = True
            heappush(self._heap, (te, self.sim.next_seq(), self._on_busy_end, ()))
        return frame

    def _arm_credit_wake(self, now):
        soonest = None
        gate_blocked = False
        for q in self.order:
            if q.frames:
                if q.shaped and q.update(now) < 0:
                    t = now + max(1, math.ceil(-q.credit * 1e9 / q.idle_slope))
                    if soonest is None or t < soonest:
                        soonest = t
                else:
                    gate_blocked = True
        if gate_blocked and self.gate is not None:
            t = now + 1_000
            soonest = t if soonest is None else min(soonest, t)
        if soonest is None:
            return
        if self._credit_wake_at is None or soonest < self._credit_wake_at or self._credit_wake_at < now:
            self._credit_wake_at = soonest
            self.sim.schedule(soonest, self._on_credit_wake)

    def _on_busy_end(self):
        self._busy_wake = False
        now = self.sim._now
        if now >= self.busy_until:
            self._try_send(now)

    def _on_credit_wake(self):
        now = self.sim._now
        if self._credit_wake_at == now:
            self._credit_wake_at = None
        if now >= self.busy_until:
            self._try_send(now)

    def settle(self, t):
        """Hand every landed frame that arrived by ``t`` to the sink."""
        landing = self.landing
        sink = self.sink
        while landing and landing[0][0] <= t:
            at, frame = landing.popleft()
            sink(frame, at)

    def link_down(self, now):
        """Abort the frame on the wire and flush every queue."""
        if self.landing:
            # arrived strictly before the failure: delivered; still on the wire: lost
            self.settle(now - 1)
            while self.landing:
                self.on_drop(self.landing.popleft()[1], "link-down")
        if self.shaped:
            for c in self.order:
                c.update(now)
        if self.busy_until > now:
            self.channel.truncate(now, self.busy_until)
            self.current.tx_end = -1
            self.busy_until = now
        for q in self.order:
            while q.frames:
                frame = q.frames.pop(0)
                self.queued -= 1
                self.on_drop(frame, "link-down")
            if q.credit > 0:
                q.credit = 0.0

    def frames_queued(self):
        for q in self.order:
            yield from q.frames

    def frames_landing(self):
        for _at, frame in self.landing:
            yield frame


def default_idle_slopes(class_loads, link_rate, min_fraction=MIN_IDLE_FRACTION,
                        headroom=IDLE_SLOPE_HEADROOM):
    """Idle slope per class: ``headroom`` x configured load, clamped to [min_fraction, 1] of the link."""
    slopes = {}
    for pcp, load in class_loads.items():
        slope = max(min_fraction * link_rate, headroom * load)
        slopes[pcp] = min(float(link_rate), slope)
    return slopes


# ---------------------------------------------------------------- forwarding

class ForwardingTable:
    """Static (stream, member path) -> route map, compiled into per-switch next hops."""

    def __init__(self):
        self.routes = {}
        self.next_hops = {}

    def add_route(self, stream_id, member, route):
        route = tuple(route)
        if len(set(route)) != len(route):
            raise ValueError(f"route for {stream_id}/{member} has a loop: {route}")
        self.routes[(stream_id, member)] = route
        for here, nxt in zip(route, route[1:]):
            self.next_hops.setdefault(here, {})[(stream_id, member)] = nxt

    def route(self, stream_id, member=None):
        return self.routes.get((stream_id, member))


def forward(table, switch, frame, ingress=None):
    """Next node for ``frame`` at ``switch``; None when there is no route or it would echo."""
    nxt = table.next_hops.get(switch, {}).get((frame.stream_id, frame.member_path))
    if nxt is None or nxt == ingress:
        return None
    return nxt
