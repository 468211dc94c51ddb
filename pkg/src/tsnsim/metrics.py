"""Per-stream and per-link measurements, and CSV/JSON export of a finished run."""

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

STREAM_COLUMNS = [
    "stream_id", "source", "destination", "pcp", "redundant",
    "sent", "received", "lost", "in_flight", "loss_rate",
    "dropped_link_down", "dropped_policer", "dropped_overflow", "dropped_no_route",
    "eliminated_duplicates",
    "latency_median_ns", "latency_mean_ns", "latency_std_ns", "latency_min_ns", "latency_max_ns",
    "jitter_std_ns", "jitter_min_ns", "jitter_max_ns", "recovery_ns",
]
LINK_COLUMNS = ["link", "window_start_ns", "utilization"]
DELIVERY_COLUMNS = ["stream_id", "app_seq", "sent_at_ns", "received_at_ns", "latency_ns", "member_path"]


@dataclass
class LatencySummary:
    median: int
    mean: float
    std: float
    min: int
    max: int
    count: int


@dataclass
class JitterSummary:
    std: float
    min: int
    max: int


@dataclass
class StreamStats:
    stream_id: str
    sent: int = 0
    received: int = 0
    lost: int = 0
    in_flight: int = 0
    loss_rate: float = 0.0
    loss_rate_defined: bool = True
    latency: LatencySummary | None = None
    jitter: JitterSummary | None = None
    recovery_time: int | None = 0


@dataclass
class UtilizationSeries:
    link: str
    window: int
    samples: list = field(default_factory=list)


def loss_stats(log, in_flight=0):
    """Counts for one stream; ``lost`` excludes originals still in flight at the end."""
    stats = StreamStats(log.spec.stream_id, sent=log.sent, received=log.received,
                        lost=log.lost, in_flight=in_flight)
    if log.sent == 0:
        stats.loss_rate = 0.0
        stats.loss_rate_defined = False
    else:
        stats.loss_rate = log.lost / log.sent
    return stats


def latency_stats(latencies):
    """Summary of end-to-end delays; the median is the lower of the two middles."""
    if len(latencies) == 0:
        return None
    arr = np.asarray(latencies, dtype=np.int64)
    srt = np.sort(arr)
    return LatencySummary(median=int(srt[(len(srt) - 1) // 2]), mean=float(arr.mean()),
                          std=float(arr.std()), min=int(srt[0]), max=int(srt[-1]), count=len(arr))


def jitter_series(latencies):
    """Signed consecutive latency differences and their std/min/max."""
    if len(latencies) < 2:
        return [], None
    diffs = np.diff(np.asarray(latencies, dtype=np.int64))
    return diffs.tolist(), JitterSummary(std=float(diffs.std()), min=int(diffs.min()),
                                         max=int(diffs.max()))


def utilization(channel, t_end, window=None):
    """Fraction of capacity used in each window of ``[0, t_end)``.

    Uses the channel's own recording window; ``window`` must be a multiple of it.
    """
    base = channel.window_ns
    window = window or base
    if window % base:
        raise ValueError("window must be a multiple of the recording window")
    step = window // base
    n = -(-t_end // window)
    samples = []
    for i in range(n):
        busy = sum(channel.busy_ns.get(i * step + k, 0) for k in range(step))
        span = min(window, t_end - i * window)
        samples.append(min(1.0, busy / span) if span > 0 else 0.0)
    return UtilizationSeries(channel.name, window, samples)


def stream_link_bits(channel, stream_id, t_start=0, t_end=None):
    """Bits of one stream that started transmission on ``channel`` in ``[t_start, t_end)`` windows."""
    w = channel.window_ns
    total = 0
    for (sid, idx), bits in channel.stream_bits.items():
        if sid != stream_id:
            continue
        if idx * w < t_start or (t_end is not None and idx * w >= t_end):
            continue
        total += bits
    return total


def stream_utilization(channel, stream_id, t_start, t_end):
    bits = stream_link_bits(channel, stream_id, t_start, t_end)
    return bits / (channel.link.capacity_bps * (t_end - t_start) / 1e9)


def path_channels(topo, route):
    return [topo.channel(a, b) for a, b in zip(route, route[1:])]


def collect_stream_stats(record):
    out = {}
    for sid, log in record.logs.items():
        in_flight = record.census.get(sid, {}).get("originals", 0)
        stats = loss_stats(log, in_flight)
        lats = log.latencies()
        stats.latency = latency_stats(lats)
        _, stats.jitter = jitter_series(lats)
        stats.recovery_time = record.recovery.get(sid, 0)
        out[sid] = stats
    return out


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}" if abs(value) < 10 else f"{value:.3f}"
    return str(value)


def stream_row(log, stats):
    spec = log.spec
    lat, jit = stats.latency, stats.jitter
    return {
        "stream_id": spec.stream_id, "source": spec.source, "destination": spec.destination,
        "pcp": spec.pcp, "redundant": spec.redundant,
        "sent": stats.sent, "received": stats.received, "lost": stats.lost,
        "in_flight": stats.in_flight, "loss_rate": stats.loss_rate,
        "dropped_link_down": log.drops["link-down"], "dropped_policer": log.drops["policer"],
        "dropped_overflow": log.drops["overflow"], "dropped_no_route": log.drops["no-route"],
        "eliminated_duplicates": log.eliminated,
        "latency_median_ns": lat.median if lat else None, "latency_mean_ns": lat.mean if lat else None,
        "latency_std_ns": lat.std if lat else None, "latency_min_ns": lat.min if lat else None,
        "latency_max_ns": lat.max if lat else None,
        "jitter_std_ns": jit.std if jit else None, "jitter_min_ns": jit.min if jit else None,
        "jitter_max_ns": jit.max if jit else None,
        "recovery_ns": stats.recovery_time,
    }


def summary(record, stats=None):
    """Deterministic structured summary of a run (no wall-clock fields)."""
    stats = stats or collect_stream_stats(record)
    streams = {sid: {k: v for k, v in stream_row(record.logs[sid], st).items()}
               for sid, st in sorted(stats.items())}
    ports = {}
    for (a, b), port in sorted(record.ports.items()):
        if port.dispatched == 0:
            continue
        ports[f"{a}->{b}"] = {
            "frames": port.dispatched,
            "mean_wait_ns": port.wait_total / port.dispatched,
            "max_wait_ns": port.wait_max,
            "overflow_drops": sum(q.overflow for q in port.order),
        }
    # bits before the first fault are the undisturbed reference for overhead comparisons
    prefault_end = record.fault_window[0] if record.fault_window else record.runtime_ns
    paths = {}
    for (sid, member), route in sorted(record.routes.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
        if sid not in record.redundancy and sid != record.focus_stream:
            continue
        chans = path_channels(record.topology, route)
        paths[f"{sid}/{member or 'primary'}"] = {
            "route": list(route),
            "bits": {c.name: stream_link_bits(c, sid) for c in chans},
            "prefault_bits": {c.name: stream_link_bits(c, sid, 0, prefault_end) for c in chans},
        }
    ts = record.timesync
    return {
        "scenario": record.name,
        "seed": record.seed,
        "runtime_ns": record.runtime_ns,
        "focus_stream": record.focus_stream,
        "fault_window_ns": list(record.fault_window) if record.fault_window else None,
        "fault_log": [list(entry) for entry in record.fault_log],
        "redundancy": {sid: {"split": c.split_node, "merge": c.merge_node,
                             "member_paths": {k: list(v) for k, v in c.member_paths.items()}}
                       for sid, c in sorted(record.redundancy.items())},
        "streams": streams,
        "ports": ports,
        "prefault_end_ns": prefault_end,
        "stream_paths": paths,
        "timesync": {"rounds": ts.rounds, "max_offset_error_ns": ts.max_offset_error(),
                     "per_node_max_error_ns": {n: c.max_error for n, c in sorted(ts.clocks.items())}},
        "events": record.events,
        "config_hashes": record.hashes,
    }


def export(record, out_dir, window=None):
    """Write streams.csv, links.csv, deliveries.csv, summary.json and manifest.json."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    stats = collect_stream_stats(record)

    with open(out / "streams.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(STREAM_COLUMNS)
        for sid in sorted(stats):
            row = stream_row(record.logs[sid], stats[sid])
            writer.writerow([_fmt(row[c]) for c in STREAM_COLUMNS])

    with open(out / "links.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LINK_COLUMNS)
        for key in sorted(record.topology.channels):
            series = utilization(record.topology.channels[key], record.runtime_ns, window)
            for i, u in enumerate(series.samples):
                writer.writerow([series.link, i * series.window, f"{u:.6f}"])

    with open(out / "deliveries.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DELIVERY_COLUMNS)
        for sid in sorted(record.logs):
            log = record.logs[sid]
            for q, s, r, m in zip(log.seqs, log.sent_at, log.received_at, log.members):
                writer.writerow([sid, q, s, r, r - s, m or ""])

    with open(out / "summary.json", "w") as fh:
        json.dump(summary(record, stats), fh, indent=1, sort_keys=True)
        fh.write("\n")

    manifest = {"scenario": record.name, "seed": record.seed, "config_hashes": record.hashes,
                "tool_version": record.tool_version, "wall_clock_s": round(record.wall_clock_s, 3)}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return [out / name for name in ("streams.csv", "links.csv", "deliveries.csv",
                                    "summary.json", "manifest.json")]


def stats_dict(stats):
    return asdict(stats)


# ------------------------------------------------------------ comparing exported runs

COMPARE_FIELDS = ["loss_rate", "latency_median_ns", "jitter_std_ns", "recovery_ns"]


@dataclass
class ExportedRun:
    path: Path
    manifest: dict
    summary: dict
    streams: dict   # stream_id -> row of strings
    links: dict     # link name -> list of utilization samples


@dataclass
class Comparison:
    streams: dict = field(default_factory=dict)     # stream_id -> field -> (a, b, delta)
    links: dict = field(default_factory=dict)       # link -> (mean_a, mean_b, ratio)
    replicated: dict = field(default_factory=dict)  # stream_id -> (bits_a, bits_b, ratio)
    warnings: list = field(default_factory=list)


def load_run(path):
    """Read an export directory back; it must contain a manifest."""
    path = Path(path)
    if not (path / "manifest.json").is_file():
        raise FileNotFoundError(f"{path}: no manifest.json (not an export directory)")
    manifest = json.loads((path / "manifest.json").read_text())
    summ = json.loads((path / "summary.json").read_text())
    with open(path / "streams.csv", newline="") as fh:
        streams = {row["stream_id"]: row for row in csv.DictReader(fh)}
    links = {}
    with open(path / "links.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            links.setdefault(row["link"], []).append(float(row["utilization"]))
    return ExportedRun(path, manifest, summ, streams, links)


def _num(text):
    if text in ("", None):
        return None
    return float(text)


def _ratio(a, b):
    if a is None or b is None:
        return None
    if a == 0:
        return 0.0 if b == 0 else float("inf")
    return b / a


def segment_bits(summ, stream_id, split, merge, key="prefault_bits"):
    """Bits of ``stream_id`` on every recorded path section running from ``split`` to ``merge``."""
    total, seen = 0, False
    for name, entry in summ.get("stream_paths", {}).items():
        if name.split("/", 1)[0] != stream_id:
            continue
        route = entry["route"]
        if split not in route or merge not in route:
            continue
        i, j = route.index(split), route.index(merge)
        if i >= j:
            continue
        seen = True
        for a, b in zip(route[i:j], route[i + 1:j + 1]):
            total += entry[key].get(f"{a}->{b}", 0)
    return total if seen else None


def compare_runs(run_a, run_b):
    """Deltas (b - a) per stream, utilization ratios (b / a) per link, replicated-segment ratios."""
    out = Comparison()
    ids_a, ids_b = set(run_a.streams), set(run_b.streams)
    if ids_a != ids_b:
        if ids_a - ids_b:
            out.warnings.append(f"only in {run_a.path}: {', '.join(sorted(ids_a - ids_b))}")
        if ids_b - ids_a:
            out.warnings.append(f"only in {run_b.path}: {', '.join(sorted(ids_b - ids_a))}")
    for sid in sorted(ids_a & ids_b):
        row = {}
        for name in COMPARE_FIELDS:
            a, b = _num(run_a.streams[sid].get(name)), _num(run_b.streams[sid].get(name))
            row[name] = (a, b, None if a is None or b is None else b - a)
        out.streams[sid] = row

    for link in sorted(set(run_a.links) | set(run_b.links)):
        if link not in run_a.links or link not in run_b.links:
            out.warnings.append(f"link {link} missing from one run")
            continue
        ma = float(np.mean(run_a.links[link])) if run_a.links[link] else 0.0
        mb = float(np.mean(run_b.links[link])) if run_b.links[link] else 0.0
        out.links[link] = (ma, mb, _ratio(ma, mb))

    # the replicated section is defined by whichever run uses redundancy for a stream
    for first, second, flip in ((run_a, run_b, False), (run_b, run_a, True)):
        for sid, red in sorted(second.summary.get("redundancy", {}).items()):
            if sid in out.replicated or sid in first.summary.get("redundancy", {}):
                continue
            bits_plain = segment_bits(first.summary, sid, red["split"], red["merge"])
            bits_red = segment_bits(second.summary, sid, red["split"], red["merge"])
            if bits_plain is None or bits_red is None:
                out.warnings.append(f"{sid}: no path data for the {red['split']}..{red['merge']} section")
                continue
            a, b = (bits_red, bits_plain) if flip else (bits_plain, bits_red)
            out.replicated[sid] = (a, b, _ratio(a, b))
    return out
