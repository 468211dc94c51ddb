"""Frame replication at a split node and sequence-recovery elimination at a merge node."""

from dataclasses import dataclass, field

import networkx as nx

from .netmodel import RTAG_BYTES, link_key

SEQ_SPACE = 1 << 16
HISTORY_LENGTH = 64
RESET_TIMEOUT_NS = 100_000_000


class RedundancyError(ValueError):
    pass


@dataclass
class RedundancyConfig:
    stream_id: str
    split_node: str
    merge_node: str
    member_paths: dict  # label -> tuple of node names, split .. merge

    def __post_init__(self):
        self.member_paths = {k: tuple(v) for k, v in self.member_paths.items()}

    @property
    def labels(self):
        return list(self.member_paths)

    def member_links(self, label):
        path = self.member_paths[label]
        return [link_key(a, b) for a, b in zip(path, path[1:])]


def check_redundancy(cfg, topo=None):
    """List of problems with ``cfg``: fewer than two members, bad endpoints, shared links."""
    problems = []
    if len(cfg.member_paths) < 2:
        problems.append(f"{cfg.stream_id}: needs at least two member paths")
    used = {}
    for label, path in cfg.member_paths.items():
        if not path or path[0] != cfg.split_node or path[-1] != cfg.merge_node:
            problems.append(f"{cfg.stream_id}/{label}: must run from {cfg.split_node} to {cfg.merge_node}")
        if len(set(path)) != len(path):
            problems.append(f"{cfg.stream_id}/{label}: path revisits a node")
        for a, b in zip(path, path[1:]):
            if topo is not None and link_key(a, b) not in topo.links:
                problems.append(f"{cfg.stream_id}/{label}: no link {a}<->{b}")
            key = link_key(a, b)
            if key in used and used[key] != label:
                problems.append(f"{cfg.stream_id}: members {used[key]} and {label} share link {a}<->{b}")
            used[key] = label
    return problems


def build_redundant_paths(stream_id, topo, split_node, merge_node, labels=("direct", "alternate"),
                          via=None):
    """Pick two link-disjoint split->merge paths.

    With ``via`` (label -> intermediate node list) the members are pinned
    through those nodes; otherwise the two shortest edge-disjoint paths are used.
    """
    g = topo.graph()
    if via:
        members = {}
        for label, hops in via.items():
            path = [split_node]
            for target in list(hops) + [merge_node]:
                if not g.has_edge(path[-1], target):
                    seg = nx.shortest_path(g, path[-1], target)
                    path.extend(seg[1:])
                else:
                    path.append(target)
            members[label] = path
        cfg = RedundancyConfig(stream_id, split_node, merge_node, members)
    else:
        try:
            paths = list(nx.edge_disjoint_paths(g, split_node, merge_node))
        except (nx.NetworkXNoPath, nx.NetworkXError) as exc:
            raise RedundancyError(f"{stream_id}: {exc}") from None
        if len(paths) < 2:
            raise RedundancyError(f"{stream_id}: no pair of link-disjoint paths "
                                  f"between {split_node} and {merge_node}")
        paths.sort(key=lambda p: (len(p), p))
        cfg = RedundancyConfig(stream_id, split_node, merge_node, dict(zip(labels, paths[:2])))
    problems = check_redundancy(cfg, topo)
    if problems:
        raise RedundancyError("; ".join(problems))
    return cfg


def replicate(frame, cfg, seq):
    """One copy per member path, each carrying ``seq`` and the redundancy tag."""
    if frame.stream_id != cfg.stream_id:
        raise RedundancyError(f"frame of {frame.stream_id} replicated with config for {cfg.stream_id}")
    origin = frame.origin
    copies = []
    for label in cfg.member_paths:
        dup = frame.copy()
        dup.frer_seq = seq % SEQ_SPACE
        dup.member_path = label
        dup.route_key = (frame.stream_id, label)
        if frame.frer_seq is None:
            dup.overhead_bytes = frame.overhead_bytes + RTAG_BYTES
        copies.append(dup)
    origin[0] += len(copies) - 1
    return copies


@dataclass
class SequenceRecoveryState:
    history_length: int = HISTORY_LENGTH
    reset_timeout: int = RESET_TIMEOUT_NS
    highest_seq: int | None = None
    history: int = 0            # bit i set => highest_seq - i already accepted
    last_accept_at: int = 0
    passed: int = 0
    discarded: int = 0
    rogue: int = 0
    resets: int = 0


def _delta(seq, highest):
    d = (seq - highest) % SEQ_SPACE
    return d - SEQ_SPACE if d >= SEQ_SPACE // 2 else d


def recover(state, seq, t):
    """True to pass the frame on, False to discard it as a duplicate.

    Vector recovery over a ``history_length`` window with 16-bit wrap. A frame
    older than the window is treated as a stale duplicate. After
    ``reset_timeout`` without a passed frame the window restarts at the next
    arrival.
    """
    if state.highest_seq is not None and t - state.last_accept_at > state.reset_timeout:
        state.highest_seq = None
        state.resets += 1
    if state.highest_seq is None:
        state.highest_seq = seq
        state.history = 1
        state.last_accept_at = t
        state.passed += 1
        return True
    d = _delta(seq, state.highest_seq)
    H = state.history_length
    if d > 0:
        state.history = ((state.history << d) | 1) & ((1 << H) - 1) if d < H else 1
        state.highest_seq = seq
        state.last_accept_at = t
        state.passed += 1
        return True
    if d <= -H:
        state.rogue += 1
        state.discarded += 1
        return False
    bit = 1 << (-d)
    if state.history & bit:
        state.discarded += 1
        return False
    state.history |= bit
    state.last_accept_at = t
    state.passed += 1
    return True


@dataclass
class SequenceGenerator:
    next_seq: int = 0

    def take(self):
        seq = self.next_seq
        self.next_seq = (seq + 1) % SEQ_SPACE
        return seq


@dataclass
class FrerFunction:
    """Runtime pairing of one redundancy config with its generator and recovery state."""
    cfg: RedundancyConfig
    generator: SequenceGenerator = field(default_factory=SequenceGenerator)
    recovery: SequenceRecoveryState = field(default_factory=SequenceRecoveryState)
