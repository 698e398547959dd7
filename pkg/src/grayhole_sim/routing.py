"""On-demand route discovery and the node state machine.

Nodes find routes by flooding route requests; the destination (or any
relay with a live cached route) answers with a route reply that travels
back along the reverse path, installing next-hop entries as it goes.
Freshness is decided by destination sequence number first, hop count
second.  Packets with no route wait in a small per-destination buffer
while one discovery runs; on timeout the buffer drains as lost.

The same Node class hosts honest and compromised behavior: a node with
an attached adversary answers every route request with a forged reply
and consults the adversary before relaying data-class packets, while a
node with an attached detector feeds it route replies and probe
arrivals.  Conviction state (the faulty list) gates every interaction:
convicted nodes' control traffic is ignored, no routes are kept through
them, and their data is refused.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import (DELIVERED, DISCOVERY_TIMEOUT, LOST_CHANNEL,
                     DROPPED_BUFFER, OUT_OF_RANGE, Simulator, to_us)
from .messages import (DataPacket, FaultyExchange, Rreq, Rrep, SourceRouted)
from .alarm import AlarmBook, FaultyList, SignatureScheme, verify_aggregate

# Additional terminal outcomes produced above the link layer.
TTL_EXHAUSTED = "ttl_exhausted"
PENDING_OVERFLOW = "pending_overflow"
REFUSED_FAULTY = "refused_faulty"
MALICIOUSLY_DROPPED = "maliciously_dropped"


@dataclass(slots=True)
class RouteEntry:
    next_hop: int
    hop_count: int
    dest_seq: int
    expires_us: int


class Node:
    """One network participant.

    ``detector`` and ``adversary`` are attached by the scenario builder
    after construction; both are optional and independent.
    """

    def __init__(self, engine: Simulator, node_id: int, cfg,
                 scheme: SignatureScheme):
        self.engine = engine
        self.id = node_id
        self.cfg = cfg
        self.scheme = scheme

        self.routes: dict[int, RouteEntry] = {}
        # Freshest destination sequence ever accepted per target.  Kept
        # across route deletion and bumped when a route breaks, so a
        # rediscovery can only be answered with strictly newer
        # information than the broken route -- the invariant that keeps
        # next-hop chains acyclic.
        self.known_seq: dict[int, int] = {}
        self.pending: dict[int, deque] = {}
        self.seen_rreq: set[tuple[int, int]] = set()
        self.own_seq = 0
        self._next_bid = 0
        self._disc_token: dict[int, int] = {}
        self._token_counter = 0
        self._disc_backoff: dict[int, tuple[int, int]] = {}
        self._draining: set[int] = set()

        from .detection import DriTable
        self.dri = DriTable()
        self.faulty = FaultyList()
        self.alarms = AlarmBook(cfg.detection_k, scheme,
                                cfg.detection_alarm_expiry_epochs)
        self.detector = None
        self.adversary = None

        self.route_lifetime_us = to_us(cfg.routing_route_lifetime_s)
        self.route_lifetime_s = cfg.routing_route_lifetime_s
        self.discovery_timeout_s = cfg.routing_discovery_timeout_s
        self.discovery_retries = cfg.routing_discovery_retries
        self.link_retries = cfg.routing_link_retries
        self.pending_cap = cfg.routing_pending_capacity
        self.max_queue_wait_us = to_us(cfg.routing_max_queue_wait_s)
        self.net_ttl = cfg.routing_net_ttl
        self.piggyback = (cfg.detection_propagation == "piggyback"
                          and cfg.detection_enabled)

    # ------------------------------------------------------------------
    # plumbing

    def send(self, dst: int, pkt) -> str:
        """Unicast with request/grant accounting.

        A frame lost to channel noise is retransmitted immediately, up
        to the configured retry budget, the way an acknowledged MAC
        masks transient loss.  Every attempt is recorded.
        """
        outcome = self.engine.transmit(self.id, dst, pkt)
        self.dri.note_attempt(dst, outcome == DELIVERED)
        retries = self.link_retries
        while outcome == LOST_CHANNEL and retries > 0:
            retries -= 1
            outcome = self.engine.transmit(self.id, dst, pkt)
            self.dri.note_attempt(dst, outcome == DELIVERED)
        return outcome

    def _attach(self):
        return self.faulty.snapshot() if self.piggyback else None

    def _flow_terminal(self, pkt: DataPacket, outcome: str) -> None:
        if pkt.flow_id >= 0:
            self.engine.trace.emit(
                self.engine.now, "flow", pkt.src, pkt.dst, outcome,
                pkt.size_bytes, {"flow": pkt.flow_id, "seq": pkt.seq})

    # ------------------------------------------------------------------
    # routing table

    def _drop_route(self, dst: int) -> None:
        """Remove a route and retire its sequence generation: anything
        cached elsewhere with the same sequence is now suspect."""
        entry = self.routes.pop(dst, None)
        if entry is not None and entry.dest_seq >= self.known_seq.get(dst, 0):
            self.known_seq[dst] = entry.dest_seq + 1

    def _fresh_route(self, dst: int):
        entry = self.routes.get(dst)
        if entry is None:
            return None
        if entry.expires_us <= self.engine.now:
            self._drop_route(dst)
            return None
        return entry

    def _update_route(self, dst: int, next_hop: int, hop_count: int,
                      seq: int) -> None:
        if dst == self.id:
            return
        if next_hop in self.faulty or dst in self.faulty:
            return
        if seq < self.known_seq.get(dst, 0):
            return
        self.known_seq[dst] = seq
        cur = self._fresh_route(dst)
        if cur is not None and seq == cur.dest_seq:
            # A same-sequence claim may only refresh the entry we
            # already trust.  Re-pointing at a different neighbor on a
            # mere hop-count improvement is how equal-sequence forgeries
            # from two attackers braid honest tables into cycles.
            if hop_count >= cur.hop_count or next_hop != cur.next_hop:
                return
        self.routes[dst] = RouteEntry(next_hop, hop_count, seq,
                                      self.engine.now + self.route_lifetime_us)
        self._flush_pending(dst)

    def _invalidate_route(self, dst: int, next_hop: int) -> None:
        entry = self.routes.get(dst)
        if entry is not None and entry.next_hop == next_hop:
            self._drop_route(dst)

    # ------------------------------------------------------------------
    # discovery

    def _new_rreq(self, target: int, flood_ttl: int,
                  any_freshness: bool = False) -> Rreq:
        self.own_seq += 1
        bid = self._next_bid
        self._next_bid += 1
        self.seen_rreq.add((self.id, bid))
        requested = 0 if any_freshness else self.known_seq.get(target, 0)
        return Rreq(origin=self.id, target=target, broadcast_id=bid,
                    hop_count=0, origin_seq=self.own_seq,
                    flood_ttl=flood_ttl, requested_seq=requested,
                    fl=self._attach())

    def start_discovery(self, target: int) -> None:
        """Kick off one discovery episode, or join the one in flight.

        An episode floods up to ``1 + discovery_retries`` times with
        the per-attempt wait doubling each time; buffered packets ride
        across attempts and drop only when the episode gives up.
        Repeated failed episodes for the same destination back off so a
        long-unreachable destination does not flood continuously.
        """
        if target in self._disc_token:
            return
        self._token_counter += 1
        token = self._token_counter
        self._disc_token[target] = token
        next_allowed = self._disc_backoff.get(target, (0, 0))[0]
        delay = max(0, next_allowed - self.engine.now)
        if delay:
            self.engine.schedule_in(delay, self._send_discovery_flood,
                                    target, token, 0)
        else:
            self._send_discovery_flood(target, token, 0)

    def _send_discovery_flood(self, target: int, token: int,
                              attempt: int) -> None:
        if self._disc_token.get(target) != token:
            return
        if not self.pending.get(target):
            del self._disc_token[target]
            return
        self.engine.broadcast(self.id, self._new_rreq(target, self.net_ttl))
        wait_us = to_us(self.discovery_timeout_s) << attempt
        self.engine.schedule_in(wait_us, self._discovery_timeout,
                                target, token, attempt)

    def start_probe_discovery(self, target: int, flood_ttl: int) -> None:
        """Fresh scoped flood regardless of cached state; used as probe
        bait, so it must give the suspect something to answer.  It
        advertises no freshness requirement so any cached route (or any
        forgery) qualifies as an answer."""
        self.engine.broadcast(self.id,
                              self._new_rreq(target, flood_ttl,
                                             any_freshness=True))

    def _discovery_timeout(self, target: int, token: int,
                           attempt: int) -> None:
        if self._disc_token.get(target) != token:
            return
        if attempt < self.discovery_retries and self.pending.get(target):
            self._send_discovery_flood(target, token, attempt + 1)
            return
        del self._disc_token[target]
        timeout_us = to_us(self.discovery_timeout_s)
        backoff = self._disc_backoff.get(target, (0, timeout_us))[1]
        self._disc_backoff[target] = (self.engine.now + backoff,
                                      min(backoff * 2, 4 * timeout_us))
        # Shed only packets that have overstayed their welcome; younger
        # ones stay queued for the next episode, which lets traffic
        # survive a transient partition.
        queue = self.pending.get(target)
        if queue:
            cutoff = self.engine.now - self.max_queue_wait_us
            while queue and queue[0][0] <= cutoff:
                self._flow_terminal(queue.popleft()[1], DISCOVERY_TIMEOUT)
            if queue:
                self.start_discovery(target)

    # ------------------------------------------------------------------
    # data path

    def originate_data(self, dst: int, flow_id: int, seq: int,
                       payload_bytes: int) -> None:
        pkt = DataPacket(kind="data", src=self.id, dst=dst,
                         size_bytes=payload_bytes, ttl=self.net_ttl,
                         flow_id=flow_id, seq=seq)
        self.engine.trace.emit(self.engine.now, "flow", self.id, dst,
                               "originated", payload_bytes,
                               {"flow": flow_id, "seq": seq})
        if dst in self.faulty:
            self._flow_terminal(pkt, REFUSED_FAULTY)
            return
        self._route_or_buffer(pkt)

    def send_data_class(self, pkt: DataPacket) -> str:
        """Origin-side injection, honoring a pinned first hop."""
        if pkt.pin_next_hop is not None:
            return self.send(pkt.pin_next_hop, pkt)
        self._route_or_buffer(pkt)
        return ""

    def _route_or_buffer(self, pkt: DataPacket) -> None:
        # A destination in radio range needs no table entry at all;
        # handing over directly also sidesteps any poisoned route.
        if self.engine.adjacent(self.id, pkt.dst):
            self._send_via(pkt, pkt.dst)
            return
        route = self._fresh_route(pkt.dst)
        if route is not None:
            self._send_via(pkt, route.next_hop)
        else:
            self._buffer_or_drop(pkt)

    def _send_via(self, pkt: DataPacket, next_hop: int) -> None:
        outcome = self.send(next_hop, pkt)
        if pkt.kind == "data" and next_hop != pkt.dst:
            # handing a packet to its final destination is delivery,
            # not routing through a relay, so it is not "through"
            # evidence
            self.dri.note_forward(next_hop, self.engine.now)
        if outcome == OUT_OF_RANGE:
            # stale next hop: forget the route, park the packet, retry
            self._invalidate_route(pkt.dst, next_hop)
            self._buffer_or_drop(pkt, requeue=True)
        elif outcome in (LOST_CHANNEL, DROPPED_BUFFER):
            self._flow_terminal(pkt, outcome)
        else:
            route = self.routes.get(pkt.dst)
            if route is not None and route.next_hop == next_hop:
                route.expires_us = self.engine.now + self.route_lifetime_us

    def _buffer_or_drop(self, pkt: DataPacket, requeue: bool = False) -> None:
        queue = self.pending.get(pkt.dst)
        if queue is None:
            queue = deque()
            self.pending[pkt.dst] = queue
        # probes ride a priority lane: they are rare and tiny, and must
        # not be squeezed out by a backlog of undeliverable payload
        if self.pending_cap and len(queue) >= self.pending_cap \
                and pkt.kind == "data":
            self._flow_terminal(pkt, PENDING_OVERFLOW)
        elif requeue:
            queue.appendleft((self.engine.now, pkt))
        else:
            queue.append((self.engine.now, pkt))
        self.start_discovery(pkt.dst)

    def _flush_pending(self, dst: int) -> None:
        self._disc_token.pop(dst, None)
        self._disc_backoff.pop(dst, None)
        if dst not in self._draining:
            self._drain_pending(dst)

    def _drain_pending(self, dst: int) -> None:
        """Release one buffered packet per link-latency tick, so a
        queue built up during an outage does not flood the next hop's
        buffer the instant a route appears."""
        self._draining.discard(dst)
        queue = self.pending.get(dst)
        if not queue:
            return
        if self.engine.adjacent(self.id, dst):
            next_hop = dst
        else:
            route = self._fresh_route(dst)
            if route is None:
                self.start_discovery(dst)
                return
            next_hop = route.next_hop
        self._send_via(queue.popleft()[1], next_hop)
        if queue:
            self._draining.add(dst)
            self.engine.schedule_in(self.engine.link.per_hop_latency_us,
                                    self._drain_pending, dst)

    # ------------------------------------------------------------------
    # receive dispatch

    def on_receive(self, pkt, sender: int) -> None:
        kind = pkt.kind
        if kind == "data" or kind == "probe" or kind == "further_probe":
            self._handle_data_class(pkt, sender)
        elif kind == "rreq":
            self._handle_rreq(pkt, sender)
        elif kind == "rrep":
            self._handle_rrep(pkt, sender)
        elif kind == "alarm":
            self.on_alarm(pkt)
        elif kind == "faulty_exchange":
            self._handle_exchange(pkt)
        else:
            self._handle_source_routed(pkt)

    # ------------------------------------------------------------------
    # flooding / replies

    def _handle_rreq(self, msg: Rreq, sender: int) -> None:
        if sender in self.faulty or msg.origin in self.faulty:
            return
        self._merge_attachment(msg.fl)
        key = (msg.origin, msg.broadcast_id)
        if key in self.seen_rreq:
            return
        self.seen_rreq.add(key)
        self._update_route(msg.origin, sender, msg.hop_count + 1,
                           msg.origin_seq)
        if msg.target == self.id:
            # Answer at least as fresh as asked, or the reply would be
            # discarded on arrival.
            self.own_seq = max(self.own_seq + 1, msg.requested_seq)
            self.send(sender, Rrep(origin=msg.origin, target=self.id,
                                   hop_count=0, target_seq=self.own_seq,
                                   lifetime_s=self.route_lifetime_s,
                                   fl=self._attach()))
            return
        if self.adversary is not None and self.adversary.should_forge():
            self.send(sender, self.adversary.forge_rrep(msg))
            return
        if msg.target in self.faulty:
            return
        route = self._fresh_route(msg.target)
        if route is not None and route.dest_seq > 0 \
                and route.dest_seq >= msg.requested_seq:
            self.send(sender, Rrep(origin=msg.origin, target=msg.target,
                                   hop_count=route.hop_count,
                                   target_seq=route.dest_seq,
                                   lifetime_s=self.route_lifetime_s,
                                   fl=self._attach()))
            return
        if msg.flood_ttl > 1:
            fwd = Rreq(origin=msg.origin, target=msg.target,
                       broadcast_id=msg.broadcast_id,
                       hop_count=msg.hop_count + 1,
                       origin_seq=msg.origin_seq,
                       flood_ttl=msg.flood_ttl - 1,
                       requested_seq=msg.requested_seq, fl=self._attach())
            self.engine.broadcast(self.id, fwd)

    def _handle_rrep(self, msg: Rrep, sender: int) -> None:
        if sender in self.faulty or msg.target in self.faulty \
                or msg.origin in self.faulty:
            return
        self._merge_attachment(msg.fl)
        self._update_route(msg.target, sender, msg.hop_count + 1,
                           msg.target_seq)
        if self.detector is not None:
            self.detector.on_rrep(msg, sender)
        if msg.origin == self.id:
            return
        rev = self._fresh_route(msg.origin)
        if rev is None:
            return
        self.send(rev.next_hop, Rrep(origin=msg.origin, target=msg.target,
                                     hop_count=msg.hop_count + 1,
                                     target_seq=msg.target_seq,
                                     lifetime_s=msg.lifetime_s,
                                     fl=self._attach()))

    # ------------------------------------------------------------------
    # data relay / sink

    def _handle_data_class(self, pkt: DataPacket, sender: int) -> None:
        now = self.engine.now
        if pkt.kind == "data":
            self.dri.note_receive(sender, now)
        if pkt.dst == self.id:
            if pkt.kind == "data":
                if pkt.src in self.faulty:
                    self._flow_terminal(pkt, REFUSED_FAULTY)
                else:
                    self._flow_terminal(pkt, DELIVERED)
            elif self.detector is not None:
                self.detector.on_probe_arrival(pkt, sender)
            return
        if self.adversary is not None and self.adversary.should_drop(pkt):
            if pkt.kind == "data":
                self._flow_terminal(pkt, MALICIOUSLY_DROPPED)
            return
        if pkt.src in self.faulty or pkt.dst in self.faulty:
            self._flow_terminal(pkt, REFUSED_FAULTY)
            return
        if pkt.ttl <= 1:
            self._flow_terminal(pkt, TTL_EXHAUSTED)
            return
        pkt.ttl -= 1
        pkt.pin_next_hop = None
        self._route_or_buffer(pkt)

    # ------------------------------------------------------------------
    # source-routed control

    def send_control(self, kind: str, route: tuple, payload: tuple) -> None:
        """Emit a control message along an explicit path.  The first
        element of ``route`` is this node."""
        msg = SourceRouted(kind=kind, route=tuple(route), idx=0,
                           payload=payload)
        if len(msg.route) == 1:
            self._consume_control(msg)
            return
        msg.idx = 1
        self.send(msg.route[1], msg)

    def _handle_source_routed(self, msg: SourceRouted) -> None:
        route = msg.route
        if msg.idx >= len(route) or route[msg.idx] != self.id:
            return
        if msg.idx == len(route) - 1:
            self._consume_control(msg)
            return
        msg.idx += 1
        self.send(route[msg.idx], msg)

    def _consume_control(self, msg: SourceRouted) -> None:
        if msg.kind == "alarm_direct":
            self.on_alarm(msg.payload[0])
            return
        det = self.detector
        if det is None:
            return
        if msg.kind == "probe_query":
            det.on_probe_query(msg.payload, msg.route)
        elif msg.kind == "probe_reply":
            det.on_probe_reply(msg.payload)
        elif msg.kind == "notify":
            det.on_notify(msg.payload)
        elif msg.kind == "coop_request":
            det.on_coop_request(msg.payload)
        elif msg.kind == "verdict_notice":
            det.on_verdict_notice(msg.payload, msg.route)

    # ------------------------------------------------------------------
    # alarms, conviction, propagation

    def raise_alarm(self, suspect: int, epoch: int, nonce: int):
        alarm = self.scheme.sign_alarm(self.id, suspect, epoch, nonce)
        self.on_alarm(alarm)
        self.engine.broadcast(self.id, alarm)
        return alarm

    def on_alarm(self, alarm) -> None:
        if self.adversary is not None:
            return
        if alarm.suspect == self.id or alarm.accuser in self.faulty:
            return
        agg = self.alarms.add(alarm)
        if agg is not None:
            self._commit(agg)

    def _commit(self, agg) -> None:
        suspect = agg.suspect
        if suspect == self.id or not self.faulty.add(suspect, agg):
            return
        for dst in [d for d, r in self.routes.items()
                    if r.next_hop == suspect or d == suspect]:
            self._drop_route(dst)
        queue = self.pending.pop(suspect, None)
        if queue:
            while queue:
                self._flow_terminal(queue.popleft()[1], REFUSED_FAULTY)
        self.engine.trace.emit(self.engine.now, "faulty_commit", self.id,
                               suspect, "committed", None,
                               {"version": self.faulty.version,
                                "epoch": agg.epoch})
        if self.cfg.detection_propagation == "neighborhood":
            snap = self.faulty.snapshot()
            self.engine.broadcast(self.id, FaultyExchange(
                sender=self.id, version=snap.version,
                members=snap.members, proofs=snap.proofs))

    def _merge_attachment(self, att) -> None:
        if att is None or self.adversary is not None:
            return
        for member, proof in zip(att.members, att.proofs):
            if member in self.faulty or member == self.id:
                continue
            if proof.suspect == member and verify_aggregate(
                    proof, self.cfg.detection_k, self.scheme):
                self._commit(proof)

    def _handle_exchange(self, msg: FaultyExchange) -> None:
        if self.adversary is not None or msg.sender in self.faulty:
            return
        for member, proof in zip(msg.members, msg.proofs):
            if member in self.faulty or member == self.id:
                continue
            if proof.suspect == member and verify_aggregate(
                    proof, self.cfg.detection_k, self.scheme):
                self._commit(proof)
