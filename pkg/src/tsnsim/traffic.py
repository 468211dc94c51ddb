"""Stream definitions, emission laws and delivery logging."""

from dataclasses import dataclass, field
from typing import NamedTuple

from .netmodel import ETH_OVERHEAD_BYTES, RTAG_BYTES, Frame

LAWS = ("periodic-uniform", "event-uniform", "fixed", "sporadic")


class StreamConfigError(ValueError):
    pass


@dataclass
class StreamSpec:
    stream_id: str
    source: str
    destination: str
    pcp: int
    law: str
    min_ns: int = 0
    max_ns: int = 0
    rate_hz: float = 0.0
    payload_bytes: int = 100
    redundant: bool = False
    start_at: int = 0
    template: str = ""
    meter_rate_bps: float | None = None
    meter_bucket_bits: float | None = None

    def __post_init__(self):
        if not 0 <= self.pcp <= 7:
            raise StreamConfigError(f"{self.stream_id}: pcp {self.pcp} outside 0..7")
        if self.payload_bytes <= 0:
            raise StreamConfigError(f"{self.stream_id}: payload_bytes must be positive")
        if self.law not in LAWS:
            raise StreamConfigError(f"{self.stream_id}: unknown emission law {self.law!r}")
        if self.law == "sporadic":
            if self.rate_hz <= 0:
                raise StreamConfigError(f"{self.stream_id}: sporadic rate must be positive")
        elif not 0 < self.min_ns <= self.max_ns:
            raise StreamConfigError(f"{self.stream_id}: invalid interval range "
                                    f"[{self.min_ns}, {self.max_ns}]")

    @property
    def mean_interval_ns(self):
        if self.law == "sporadic":
            return 1e9 / self.rate_hz
        return (self.min_ns + self.max_ns) / 2

    @property
    def nominal_interval_ns(self):
        """Longest gap the law produces by design (mean for Poisson, which has no bound)."""
        if self.law == "sporadic":
            return self.mean_interval_ns
        return self.max_ns

    @property
    def frame_bytes(self):
        return self.payload_bytes + ETH_OVERHEAD_BYTES + (RTAG_BYTES if self.redundant else 0)

    @property
    def nominal_rate_bps(self):
        return self.frame_bytes * 8 * 1e9 / self.mean_interval_ns


def draw_interval(spec, rng):
    if spec.law == "sporadic":
        return max(1, int(round(rng.expovariate(spec.rate_hz) * 1e9)))
    if spec.min_ns == spec.max_ns:
        return spec.min_ns
    # same arithmetic as Random.uniform, without the extra call
    return int(round(spec.min_ns + (spec.max_ns - spec.min_ns) * rng.random()))


def next_emission(spec, rng, t, app_seq):
    """Frame emitted at ``t`` and the time of the following emission."""
    frame = Frame(spec.stream_id, spec.pcp, spec.payload_bytes, app_seq, t,
                  spec.source, spec.destination)
    return t + draw_interval(spec, rng), frame


def _expand(text, cell):
    return text.replace("{cell}", str(cell)) if cell is not None else text


def build_streams(profile, node_names=None, start_at=0):
    """Materialize the stream profile into concrete :class:`StreamSpec` objects.

    Entries whose source mentions ``{cell}`` are instantiated once per cell; an
    entry with several destinations becomes one unicast stream per destination.
    """
    cells = profile.get("cells", [None])
    specs = []
    for entry in profile["streams"]:
        name = entry["name"]
        templated = "{cell}" in entry["source"] or any("{cell}" in d for d in entry["destinations"])
        for cell in (cells if templated else [None]):
            dests = [_expand(d, cell) for d in entry["destinations"]]
            for dest in dests:
                sid = name if cell is None else f"{name}_{cell}"
                if len(dests) > 1:
                    sid = f"{sid}.{dest}"
                em = entry["emission"]
                spec = StreamSpec(
                    stream_id=sid,
                    source=_expand(entry["source"], cell),
                    destination=dest,
                    pcp=int(entry["pcp"]),
                    law=em["law"],
                    min_ns=int(em.get("min_ns", em.get("period_ns", 0))),
                    max_ns=int(em.get("max_ns", em.get("period_ns", 0))),
                    rate_hz=float(em.get("rate_hz", 0.0)),
                    payload_bytes=int(entry["payload_bytes"]),
                    start_at=int(entry.get("start_at_ns", start_at)),
                    template=name,
                    meter_rate_bps=entry.get("meter_rate_bps"),
                    meter_bucket_bits=entry.get("meter_bucket_bits"),
                )
                if node_names is not None:
                    for end in (spec.source, spec.destination):
                        if end not in node_names:
                            raise StreamConfigError(f"{sid}: unknown node {end!r}")
                specs.append(spec)
    ids = [s.stream_id for s in specs]
    if len(ids) != len(set(ids)):
        raise StreamConfigError("stream ids are not unique")
    return specs


class DeliveryRecord(NamedTuple):
    stream_id: str
    app_seq: int
    sent_at: int
    received_at: int
    member_path: str | None

    @property
    def latency(self):
        return self.received_at - self.sent_at


@dataclass
class StreamLog:
    """Everything the run learned about one stream."""
    spec: StreamSpec
    sent: int = 0
    copies_created: int = 0
    received: int = 0
    lost: int = 0
    eliminated: int = 0
    sink_duplicates: int = 0
    drops: dict = field(default_factory=lambda: {"link-down": 0, "policer": 0,
                                                 "overflow": 0, "no-route": 0})
    # delivery log as parallel lists; cheaper than one object per frame
    seqs: list = field(default_factory=list)
    sent_at: list = field(default_factory=list)
    received_at: list = field(default_factory=list)
    members: list = field(default_factory=list)
    _seen: set = field(default_factory=set)

    def records(self):
        sid = self.spec.stream_id
        return [DeliveryRecord(sid, q, s, r, m) for q, s, r, m in
                zip(self.seqs, self.sent_at, self.received_at, self.members)]

    def latencies(self):
        return [r - s for s, r in zip(self.sent_at, self.received_at)]


def sink_receive(log, frame, t):
    """Record a delivery at the listener; flags a repeated app_seq."""
    seq = frame.app_seq
    if seq in log._seen:
        log.sink_duplicates += 1
    else:
        log._seen.add(seq)
    log.received += 1
    log.seqs.append(seq)
    log.sent_at.append(frame.created_at)
    log.received_at.append(t)
    log.members.append(frame.member_path)


def expected_sent(spec, duration_ns):
    return duration_ns / spec.mean_interval_ns
