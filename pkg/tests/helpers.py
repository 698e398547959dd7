"""Shared test utilities: topology builders, independent oracles, and
small scenario drivers.

The oracles here are deliberately written from first principles (plain
breadth-first search, closed-form Markov stationary distribution, hand
arithmetic) so the simulator is always checked against an independent
computation, never against itself.
"""

from __future__ import annotations

import collections
import math

from grayhole_sim.engine import Trace, to_us
from grayhole_sim.metrics import TraceAnalyzer
from grayhole_sim.runner import build_simulation
from grayhole_sim.scenario import ScenarioConfig


# ----------------------------------------------------------------------
# topology builders


def ring_positions(n: int = 10, spacing: float = 150.0,
                   center: tuple[float, float] = (1000.0, 300.0)) -> dict:
    """n nodes on a circle with the given chord spacing: connected and
    2-connected, so any single node can be routed around."""
    r = spacing / (2 * math.sin(math.pi / n))
    cx, cy = center
    return {i: (cx + r * math.cos(2 * math.pi * i / n),
                cy + r * math.sin(2 * math.pi * i / n)) for i in range(n)}


def line_positions(n: int, spacing: float = 150.0,
                   y: float = 300.0) -> dict:
    """n nodes on a straight line; adjacent pairs only (spacing < range
    < 2*spacing)."""
    return {i: (100.0 + spacing * i, y) for i in range(n)}


def two_hub_cluster() -> dict:
    """Ten nodes where 1 and 7 share the exact neighbor set {2, 6, 8, 9}
    (plus each other), and 0, 3, 4, 5 sit far away in a separate group.

    Radio range is 200 m.  Nodes 2, 6, 8, 9 are within range of both
    hubs; the two hubs are 60 m apart; the far group is > 600 m away.
    """
    return {
        7: (500.0, 300.0),
        1: (560.0, 300.0),
        2: (530.0, 360.0),
        6: (530.0, 240.0),
        8: (440.0, 330.0),
        9: (440.0, 260.0),
        0: (1400.0, 100.0),
        3: (1400.0, 250.0),
        4: (1400.0, 400.0),
        5: (1400.0, 550.0),
    }


# ----------------------------------------------------------------------
# independent oracles


def bfs_hops(positions: dict, range_m: float, src: int, dst: int,
             exclude=()) -> int | None:
    """Hop count of a shortest path by plain breadth-first search over
    the disk graph, computed without touching simulator code."""
    ids = [i for i in positions if i not in exclude]

    def adjacent(a, b):
        (xa, ya), (xb, yb) = positions[a], positions[b]
        return math.hypot(xa - xb, ya - yb) <= range_m

    dist = {src: 0}
    queue = collections.deque([src])
    while queue:
        u = queue.popleft()
        if u == dst:
            return dist[u]
        for v in ids:
            if v != u and v not in dist and adjacent(u, v):
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist.get(dst)


def markov_stationary_bad(p_good_to_bad: float, p_bad_to_good: float) -> float:
    """Closed-form long-run fraction of time a two-state chain spends in
    its second state: pi = p_gb / (p_gb + p_bg)."""
    return p_good_to_bad / (p_good_to_bad + p_bad_to_good)


# ----------------------------------------------------------------------
# scenario drivers


class EventLog:
    """Trace listener that keeps every raw event for later assertions."""

    def __init__(self) -> None:
        self.events: list[tuple] = []

    def __call__(self, t_us, kind, src, dst, outcome, nbytes, extra):
        self.events.append((t_us, kind, src, dst, outcome, nbytes, extra))

    def of_kind(self, kind: str) -> list[tuple]:
        return [e for e in self.events if e[1] == kind]


def run_with_log(cfg: ScenarioConfig):
    """Build and run a scenario, returning (metrics, event log, engine)."""
    trace = Trace()
    analyzer = TraceAnalyzer()
    log = EventLog()
    trace.add_listener(analyzer.feed)
    trace.add_listener(log)
    engine = build_simulation(cfg, trace)
    engine.run_until(to_us(cfg.duration_s))
    return analyzer.finalize(), log, engine


def committed_by_honest(log: EventLog, truth) -> set[int]:
    """Suspects committed to any honest node's faulty list."""
    return {dst for _, kind, src, dst, *_ in log.events
            if kind == "faulty_commit" and src not in truth}
