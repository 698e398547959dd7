"""Deterministic discrete-event core: virtual clock, RNG streams, trace,
wireless link model and the simulator that ties them together.

All simulation time is kept as an integer number of microseconds so that
event ordering never depends on float rounding.  Every source of
randomness is a named stream derived from the run seed, which makes two
runs with the same seed byte-identical.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

US_PER_S = 1_000_000


class SimError(Exception):
    """Raised for internal simulation faults (scheduling into the past,
    unknown node ids, malformed packets)."""


def to_us(seconds: float) -> int:
    """Convert a wall-clock quantity in seconds to integer microseconds."""
    return round(seconds * US_PER_S)


def fmt_time(t_us: int) -> str:
    """Render an integer-microsecond timestamp as fixed-point seconds.

    Uses integer arithmetic only, so the rendering is stable across
    platforms: 1_500_000 -> "1.500000".
    """
    return f"{t_us // US_PER_S}.{t_us % US_PER_S:06d}"


class RngStreams:
    """Registry of named deterministic random streams.

    Each stream is an independent ``random.Random`` seeded from the run
    seed and the stream id.  String seeding hashes through SHA-512
    internally, so values do not depend on PYTHONHASHSEED or platform.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._streams: dict[str, random.Random] = {}

    def stream(self, stream_id: str) -> random.Random:
        rng = self._streams.get(stream_id)
        if rng is None:
            rng = random.Random(f"{self.seed}/{stream_id}")
            self._streams[stream_id] = rng
        return rng


# Transmission outcomes, also used as terminal packet outcomes in the trace.
DELIVERED = "delivered"
LOST_CHANNEL = "lost_channel"
DROPPED_BUFFER = "dropped_buffer"
OUT_OF_RANGE = "out_of_range"
MALICIOUSLY_DROPPED = "maliciously_dropped"
TTL_EXHAUSTED = "ttl_exhausted"
DISCOVERY_TIMEOUT = "discovery_timeout"
PENDING_OVERFLOW = "pending_overflow"


class Trace:
    """Event trace with pluggable sinks.

    Listeners receive raw fields (cheap, used by the live metrics
    analyzer).  Line sinks receive the canonical text rendering; lines
    are only formatted when at least one line sink is attached, which
    keeps large runs fast when no trace file was requested.
    """

    __slots__ = ("_listeners", "_line_sinks")

    def __init__(self) -> None:
        self._listeners: list[Callable] = []
        self._line_sinks: list = []

    def add_listener(self, fn: Callable) -> None:
        self._listeners.append(fn)

    def add_line_sink(self, writable) -> None:
        """Attach a file-like object; one canonical line per event."""
        self._line_sinks.append(writable)

    def emit(self, t_us: int, kind: str, src, dst, outcome, nbytes,
             extra: Optional[dict] = None) -> None:
        for fn in self._listeners:
            fn(t_us, kind, src, dst, outcome, nbytes, extra)
        if self._line_sinks:
            line = format_trace_line(t_us, kind, src, dst, outcome, nbytes, extra)
            for sink in self._line_sinks:
                sink.write(line)
                sink.write("\n")


def format_trace_line(t_us: int, kind: str, src, dst, outcome, nbytes,
                      extra: Optional[dict] = None) -> str:
    parts = [f"t={fmt_time(t_us)}", f"kind={kind}"]
    if src is not None:
        parts.append(f"src={src}")
    if dst is not None:
        parts.append(f"dst={dst}")
    if outcome is not None:
        parts.append(f"outcome={outcome}")
    if nbytes is not None:
        parts.append(f"bytes={nbytes}")
    if extra:
        for key in sorted(extra):
            parts.append(f"{key}={extra[key]}")
    return " ".join(parts)


def parse_trace_line(line: str) -> Optional[tuple]:
    """Parse one canonical trace line back into raw fields.

    Returns ``(t_us, kind, src, dst, outcome, nbytes, extra)`` or None
    for blank lines.  Unknown keys land in ``extra`` unchanged.
    """
    line = line.strip()
    if not line:
        return None
    fields: dict[str, str] = {}
    for token in line.split(" "):
        key, _, value = token.partition("=")
        if not _:
            raise SimError(f"malformed trace token: {token!r}")
        fields[key] = value
    try:
        sec, _, frac = fields.pop("t").partition(".")
        t_us = int(sec) * US_PER_S + int(frac.ljust(6, "0")[:6])
        kind = fields.pop("kind")
    except KeyError as exc:
        raise SimError(f"trace line missing field {exc}: {line!r}") from exc
    src = int(fields.pop("src")) if "src" in fields else None
    dst = int(fields.pop("dst")) if "dst" in fields else None
    outcome = fields.pop("outcome", None)
    nbytes = int(fields.pop("bytes")) if "bytes" in fields else None
    return t_us, kind, src, dst, outcome, nbytes, (fields or None)


@dataclass(frozen=True, slots=True)
class LinkModel:
    """Disc radio abstraction: symmetric neighbor relation plus a lossy,
    fixed-latency, finite-buffer unicast channel.

    ``buffer_capacity <= 0`` means unlimited receive buffering.
    """

    range_m: float = 200.0
    base_loss_prob: float = 0.01
    buffer_capacity: int = 50
    per_hop_latency_us: int = 2_000

    def __post_init__(self):
        if self.range_m <= 0:
            raise SimError("link range must be positive")
        if not 0.0 <= self.base_loss_prob <= 1.0:
            raise SimError("base_loss_prob must be in [0, 1]")
        if self.per_hop_latency_us <= 0:
            raise SimError("per-hop latency must be positive")


class Simulator:
    """Event queue, node registry, mobility ticks and the link layer.

    Nodes interact with each other exclusively through
    :meth:`transmit` / :meth:`broadcast`; there is no shared state
    between node objects apart from what travels inside packets.
    """

    def __init__(self, *, seed: int, area_w: float, area_h: float,
                 link: LinkModel, trace: Optional[Trace] = None,
                 mobility_tick_s: float = 0.5):
        self.now = 0
        self.rngs = RngStreams(seed)
        self.link = link
        self.area_w = float(area_w)
        self.area_h = float(area_h)
        self.trace = trace if trace is not None else Trace()
        self.mobility_tick_us = to_us(mobility_tick_s)

        self._heap: list = []
        self._seq = 0
        self._nonce = 0
        self._link_rng = self.rngs.stream("link")

        self.nodes: dict[int, object] = {}
        self.positions: dict[int, tuple[float, float]] = {}
        self._walkers: dict[int, object] = {}
        self._node_ids: list[int] = []
        self._adj: dict[int, tuple[int, ...]] = {}
        self._adj_sets: dict[int, frozenset] = {}
        self._inflight: dict[int, int] = {}

    # ------------------------------------------------------------------
    # event queue

    def schedule(self, at_us: int, fn: Callable, *args) -> None:
        if at_us < self.now:
            raise SimError(f"cannot schedule at {at_us} before now={self.now}")
        self._seq += 1
        heapq.heappush(self._heap, (at_us, self._seq, fn, args))

    def schedule_in(self, delay_us: int, fn: Callable, *args) -> None:
        self.schedule(self.now + delay_us, fn, *args)

    def run_until(self, end_us: int) -> None:
        """Process all events with fire time <= end_us, then advance the
        clock to end_us.  Ties fire in scheduling order."""
        heap = self._heap
        while heap and heap[0][0] <= end_us:
            t, _, fn, args = heapq.heappop(heap)
            self.now = t
            fn(*args)
        self.now = end_us

    def next_nonce(self) -> int:
        """Monotone run-unique token for probes and alarm evidence."""
        self._nonce += 1
        return self._nonce

    # ------------------------------------------------------------------
    # topology

    def add_node(self, node, position: tuple[float, float], walker=None) -> None:
        nid = node.id
        if nid in self.nodes:
            raise SimError(f"duplicate node id {nid}")
        self.nodes[nid] = node
        self.positions[nid] = (float(position[0]), float(position[1]))
        if walker is not None:
            self._walkers[nid] = walker
        self._node_ids = sorted(self.nodes)
        self._inflight[nid] = 0

    def rebuild_adjacency(self) -> None:
        ids = self._node_ids
        n = len(ids)
        if n == 0:
            self._adj = {}
            self._adj_sets = {}
            return
        pts = np.array([self.positions[i] for i in ids])
        dx = pts[:, 0][:, None] - pts[:, 0][None, :]
        dy = pts[:, 1][:, None] - pts[:, 1][None, :]
        within = (dx * dx + dy * dy) <= self.link.range_m ** 2
        np.fill_diagonal(within, False)
        adj = {}
        adj_sets = {}
        for row, nid in enumerate(ids):
            nbrs = tuple(ids[c] for c in np.flatnonzero(within[row]))
            adj[nid] = nbrs
            adj_sets[nid] = frozenset(nbrs)
        self._adj = adj
        self._adj_sets = adj_sets

    def neighbors(self, nid: int) -> tuple[int, ...]:
        """Current neighbor ids in ascending order."""
        return self._adj.get(nid, ())

    def adjacent(self, a: int, b: int) -> bool:
        return b in self._adj_sets.get(a, ())

    def start_mobility(self) -> None:
        """Build the initial adjacency and begin periodic position updates."""
        self.rebuild_adjacency()
        if self._walkers:
            self.schedule_in(self.mobility_tick_us, self._mobility_tick)

    def _mobility_tick(self) -> None:
        dt_s = self.mobility_tick_us / US_PER_S
        moved = False
        for nid in self._node_ids:
            walker = self._walkers.get(nid)
            if walker is None:
                continue
            pos = walker.advance(dt_s)
            if pos != self.positions[nid]:
                self.positions[nid] = pos
                moved = True
        if moved:
            self.rebuild_adjacency()
        self.schedule_in(self.mobility_tick_us, self._mobility_tick)

    def bfs_route(self, src: int, dst: int,
                  exclude: Iterable[int] = ()) -> Optional[list[int]]:
        """Shortest path over the instantaneous adjacency, skipping
        ``exclude`` as relays.  Deterministic: neighbors expand in
        ascending id order.  Returns [src, ..., dst] or None."""
        if src == dst:
            return [src]
        banned = set(exclude)
        banned.discard(src)
        banned.discard(dst)
        parent = {src: None}
        queue = deque([src])
        while queue:
            cur = queue.popleft()
            for nxt in self._adj.get(cur, ()):
                if nxt in parent or nxt in banned:
                    continue
                parent[nxt] = cur
                if nxt == dst:
                    path = [dst]
                    while parent[path[-1]] is not None:
                        path.append(parent[path[-1]])
                    path.reverse()
                    return path
                queue.append(nxt)
        return None

    # ------------------------------------------------------------------
    # link layer

    def transmit(self, src: int, dst: int, pkt) -> str:
        """One unicast hop attempt.  Draws range, channel loss and buffer
        admission in that order, traces the attempt, and schedules
        delivery after the fixed hop latency on success."""
        if src == dst:
            raise SimError(f"node {src} transmitting to itself")
        if src not in self.nodes or dst not in self.nodes:
            raise SimError(f"transmit between unknown nodes {src}->{dst}")
        if not self.adjacent(src, dst):
            outcome = OUT_OF_RANGE
        elif self.link.base_loss_prob > 0.0 and \
                self._link_rng.random() < self.link.base_loss_prob:
            outcome = LOST_CHANNEL
        elif 0 < self.link.buffer_capacity <= self._inflight[dst]:
            outcome = DROPPED_BUFFER
        else:
            outcome = DELIVERED
            self._inflight[dst] += 1
            self.schedule_in(self.link.per_hop_latency_us, self._deliver,
                             dst, pkt, src)
        self.trace.emit(self.now, pkt.kind, src, dst, outcome,
                        pkt.size_bytes, pkt.trace_extra())
        return outcome

    def _deliver(self, dst: int, pkt, sender: int) -> None:
        self._inflight[dst] -= 1
        node = self.nodes.get(dst)
        if node is not None:
            node.on_receive(pkt, sender)

    def broadcast(self, src: int, pkt) -> int:
        """Send a packet to every current neighbor in ascending id order.

        The same object is delivered to all receivers, so broadcast
        packets must be treated as immutable by receivers.  Returns the
        number of hop attempts."""
        count = 0
        for nbr in self._adj.get(src, ()):
            self.transmit(src, nbr, pkt)
            count += 1
        return count
