"""Credit-based shaping on one egress port.

Class 5 is shaped to 10 Mbps on a 100 Mbps link; class 0 is unshaped best
effort. Both queues start full. The shaped class gets its idle slope and
no more; best effort fills the gaps while class 5 rebuilds credit.
"""

from tsnsim.engine import MS, SECOND, Simulator
from tsnsim.netmodel import Channel, Frame, Link
from tsnsim.switchfabric import EgressPort

MBPS = 1_000_000


def main():
    sim = Simulator()
    link = Link("a", "b", 100 * MBPS)
    sent = []
    port = EgressPort(sim, Channel(link, "a", "b", 100 * MS), lambda f, at: sent.append(f),
                      lambda f, why: print("drop", why), capacity=10_000,
                      idle_slopes={5: 10 * MBPS})
    for i in range(3_000):
        port.enqueue(Frame("shaped", 5, 1_204, i, 0, "a", "b"), 0)
        port.enqueue(Frame("best-effort", 0, 1_204, i, 0, "a", "b"), 0)

    trace = []
    port.audit = lambda p, q, now: trace.append((now, q.pcp, round(p.classes[5].credit)))
    sim.run_until(SECOND)

    print("first dispatches (time us, class, class-5 credit bits):")
    for now, pcp, credit in trace[:12]:
        print(f"  {now / 1e3:9.2f}  {pcp}  {credit:7d}")
    bits = {}
    for f in sent:
        if f.tx_start < SECOND:
            bits[f.stream_id] = bits.get(f.stream_id, 0) + f.bits
    for sid, b in sorted(bits.items()):
        print(f"{sid:12s} {b / 1e6:7.3f} Mbit in 1 s")
    print("class 5 is held to its 10 Mbps idle slope; the rest of the link goes to class 0")


if __name__ == "__main__":
    main()
