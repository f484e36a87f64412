from __future__ import annotations

import numpy as np

from ..trace import Trace
from .simulation import Message, WorkloadError


def generate_workload(
    trace: Trace,
    n_messages: int,
    ttl: int,
    active_window: tuple[int, int] | None = None,
    seed: int = 0,
) -> list[Message]:
    """Uniform random (source, destination) pairs generated uniformly over ``active_window``."""
    nodes = sorted(trace.nodes)
    if len(nodes) < 2:
        raise WorkloadError("a workload needs at least two nodes")
    if ttl <= 0:
        raise WorkloadError("ttl must be > 0")
    lo, hi = active_window if active_window is not None else trace.horizon
    if not trace.horizon[0] <= lo <= hi <= trace.horizon[1]:
        raise WorkloadError(f"active window {(lo, hi)} is not inside trace horizon {trace.horizon}")
    rng = np.random.default_rng(seed)
    width = len(str(max(n_messages - 1, 0)))
    out = []
    for k in range(n_messages):
        src, dst = rng.choice(len(nodes), size=2, replace=False)
        t_s = int(rng.integers(lo, hi, endpoint=True))
        out.append(Message(f"m{k:0{width}d}", nodes[src], nodes[dst], t_s, t_s + ttl))
    return out
