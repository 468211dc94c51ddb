"""Discrete-event core: integer-nanosecond clock, FIFO-stable event heap, seeded RNG streams."""

import hashlib
import heapq
import random

NS = 1
US = 1_000
MS = 1_000_000
SECOND = 1_000_000_000


class SchedulingError(ValueError):
    pass


class Simulator:
    """Single-threaded event loop.

    Events are ``(fire_at, seq, fn, args)`` tuples; ``seq`` is a global
    insertion counter so that events sharing a timestamp run in the order they
    were scheduled.
    """

    def __init__(self):
        self._heap = []
        self._seq = 0
        self._now = 0
        self._cancelled = set()
        self.executed = 0

    def now(self):
        return self._now

    def schedule(self, at, fn, *args):
        """Schedule ``fn(*args)`` at absolute time ``at`` (ns). Returns a handle."""
        at = int(at)
        if at < self._now:
            raise SchedulingError(f"cannot schedule at {at} ns, clock is already at {self._now} ns")
        seq = self.next_seq()
        heapq.heappush(self._heap, (at, seq, fn, args))
        return seq

    def poster(self):
        """Unchecked ``post(at, fn, args)`` for hot paths that already guarantee ``at >= now``."""
        heap, push = self._heap, heapq.heappush

        def post(at, fn, args):
            push(heap, (at, self.next_seq(), fn, args))
        return post

    def next_seq(self):
        """Take the next insertion number (the FIFO tie-break of same-time events)."""
        seq = self._seq
        self._seq = seq + 1
        return seq

    def schedule_in(self, delay, fn, *args):
        return self.schedule(self._now + delay, fn, *args)

    def cancel(self, handle):
        self._cancelled.add(handle)

    def pending(self):
        """Live (non-cancelled) events, in no particular order."""
        cancelled = self._cancelled
        return [ev for ev in self._heap if ev[1] not in cancelled]

    def run_until(self, t_end):
        """Execute every event with ``fire_at <= t_end``; leaves the clock at ``t_end``."""
        t_end = int(t_end)
        if t_end < self._now:
            raise SchedulingError(f"run_until({t_end}) is in the past (now={self._now})")
        heap = self._heap
        cancelled = self._cancelled
        pop = heapq.heappop
        count = 0
        while heap and heap[0][0] <= t_end:
            at, seq, fn, args = pop(heap)
            if cancelled and seq in cancelled:
                cancelled.discard(seq)
                continue
            self._now = at
            fn(*args)
            count += 1
        self._now = t_end
        self.executed += count
        return count


def derive_seed(master_seed, label):
    digest = hashlib.sha256(f"{int(master_seed)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class RngStreams:
    """Named, independent random streams derived from one master seed.

    Each label hashes to its own seed, so adding a stream never perturbs the
    draws of another.
    """

    def __init__(self, seed):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self._streams = {}

    def stream(self, label):
        rng = self._streams.get(label)
        if rng is None:
            rng = random.Random(derive_seed(self.seed, label))
            self._streams[label] = rng
        return rng
