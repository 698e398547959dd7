"""Packet types exchanged between nodes.

Every packet exposes ``kind`` (the trace class), ``size_bytes`` and
``trace_extra()``.  Data-class packets (kind in DATA_CLASS) are the only
ones a selective dropper will discard; everything else is control
traffic and is always forwarded.

Broadcast packets (route requests, alarms, list exchanges) are shared
between receivers and must not be mutated after sending; unicast packets
(data, probes, source-routed control) are owned by one receiver at a
time and may carry mutable hop state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

# Sequence number claimed by forged route replies.  Far above anything
# an honest destination reaches during a run, so the forged route always
# looks freshest.
SPURIOUS_SEQ = 1 << 30

DATA_CLASS = frozenset({"data", "probe", "further_probe"})


@dataclass(frozen=True, slots=True)
class FaultyAttachment:
    """Snapshot of a node's faulty list piggybacked on routing packets.

    ``proofs`` holds one alarm aggregate per member, aligned with
    ``members``; receivers verify before adopting an entry.
    """
    version: int
    members: tuple[int, ...]
    proofs: tuple  # of AlarmAggregate, same order as members

    @property
    def wire_bytes(self) -> int:
        return 4 + 12 * len(self.members)


def _fl_bytes(fl: Optional[FaultyAttachment]) -> int:
    return fl.wire_bytes if fl is not None else 0


@dataclass(slots=True)
class Rreq:
    """Route request, flooded hop by hop.

    ``requested_seq`` is the freshest destination sequence the origin
    has ever seen for the target; relays may answer from cache only
    with information at least that fresh, which is what keeps the
    protocol loop-free after route breaks.
    """
    origin: int
    target: int
    broadcast_id: int
    hop_count: int
    origin_seq: int
    flood_ttl: int
    requested_seq: int = 0
    fl: Optional[FaultyAttachment] = None

    kind = "rreq"

    @property
    def size_bytes(self) -> int:
        return 24 + _fl_bytes(self.fl)

    def trace_extra(self):
        return {"origin": self.origin, "bid": self.broadcast_id}


@dataclass(slots=True)
class Rrep:
    """Route reply, unicast back along the reverse path.

    ``target`` is the destination the route leads to, ``origin`` the
    requester the reply travels toward.
    """
    origin: int
    target: int
    hop_count: int
    target_seq: int
    lifetime_s: float
    fl: Optional[FaultyAttachment] = None

    kind = "rrep"

    @property
    def size_bytes(self) -> int:
        return 20 + _fl_bytes(self.fl)

    def trace_extra(self):
        return {"origin": self.origin, "target": self.target}


@dataclass(slots=True)
class DataPacket:
    """Application payload or detection probe travelling the data path.

    ``pin_next_hop`` forces the first hop at the origin (used by probes
    to push traffic through the node under test); relays always route by
    table.  ``nonce`` identifies a detection round, None for flow data.
    ``attempt`` distinguishes repeated probes within one round.
    """
    kind: str  # "data" | "probe" | "further_probe"
    src: int
    dst: int
    size_bytes: int
    ttl: int
    flow_id: int = -1
    seq: int = -1
    pin_next_hop: Optional[int] = None
    nonce: int = 0
    attempt: int = 0

    def trace_extra(self):
        if self.kind == "data":
            return {"flow": self.flow_id, "seq": self.seq}
        return {"nonce": self.nonce, "attempt": self.attempt}


@dataclass(slots=True)
class SourceRouted:
    """Control message carried along an explicit relay path.

    The path is computed by the sender over the instantaneous topology,
    excluding any node under test, so control traffic cannot be
    silenced by the node it is about.  ``idx`` is the position of the
    current holder in ``route``.
    """
    kind: str
    route: tuple[int, ...]
    idx: int
    payload: tuple

    SIZES = {
        "notify": 32,
        "coop_request": 32,
        "probe_query": 16,
        "probe_reply": 16,
        "verdict_notice": 32,
        "alarm_direct": 96,
    }

    @property
    def size_bytes(self) -> int:
        return self.SIZES[self.kind]

    @property
    def final_dst(self) -> int:
        return self.route[-1]

    @property
    def origin(self) -> int:
        return self.route[0]

    def trace_extra(self):
        return None


@dataclass(frozen=True, slots=True)
class AlarmMessage:
    """Signed single-accuser claim that ``suspect`` dropped probes
    during ``epoch``.  ``evidence_nonce`` names the detection round the
    first-hand observation came from."""
    suspect: int
    accuser: int
    epoch: int
    evidence_nonce: int
    signature: str

    kind = "alarm"
    size_bytes = 96

    def trace_extra(self):
        return {"suspect": self.suspect, "accuser": self.accuser}


@dataclass(frozen=True, slots=True)
class FaultyExchange:
    """Neighborhood propagation of a faulty list with proofs."""
    sender: int
    version: int
    members: tuple[int, ...]
    proofs: tuple

    kind = "faulty_exchange"

    @property
    def size_bytes(self) -> int:
        return 8 + 12 * len(self.members)

    def trace_extra(self):
        return {"version": self.version}
