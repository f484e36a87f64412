from __future__ import annotations

from collections import defaultdict
from itertools import groupby

from ..trace import Trace


def time_respecting_reachable(trace: Trace, src: str, dst: str, t0: float, t_v: float) -> bool:
    """True iff contacts with non-decreasing start times in ``[t0, t_v]`` carry data from ``src`` to ``dst``.

    Contacts that start at the same instant may be chained.
    """
    if t0 > t_v:
        raise ValueError("window start after window end")
    if src == dst:
        return True
    reached = {src}
    for t, group in groupby(trace.events, key=lambda e: e.start):
        if t < t0:
            continue
        if t > t_v:
            break
        adj = defaultdict(set)
        for ev in group:
            adj[ev.node_a].add(ev.node_b)
            adj[ev.node_b].add(ev.node_a)
        frontier = [n for n in adj if n in reached]
        while frontier:
            n = frontier.pop()
            for peer in adj[n]:
                if peer not in reached:
                    reached.add(peer)
                    frontier.append(peer)
        if dst in reached:
            return True
    return False
