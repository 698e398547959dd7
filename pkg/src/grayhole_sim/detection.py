"""Drop-attack detection: data routing information tables, local probe
rounds and cooperative confirmation.

Each honest node keeps one row of routing evidence per neighbor: a
"from" bit (received real data from it), a "through" bit (forwarded
real data to it), request/grant counters and a "check" bit marking that
the neighbor already survived a probe round this epoch.  A neighbor
with no evidence at all is a suspect.  The owner then picks its most
active other neighbor as a probe destination, baits the suspect with a
route request, pushes a probe through it and asks the destination - on
a path that avoids the suspect - whether the probe came out the other
side.  Only if it did not does the cooperative stage start: the
suspect's other neighbors each push three timed probes through the
suspect toward the initiating node, which tallies arrivals per witness.
Witnesses whose probes all vanished co-sign the initiator's alarm, and
a conviction happens only once enough distinct signers agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .engine import to_us
from .messages import DataPacket

PROBE_BYTES = 64
FURTHER_PROBE_ATTEMPTS = 3
# A cleared neighbor that swallows this many packets without producing
# any evidence of output becomes probe-eligible again immediately,
# instead of waiting for the next epoch.
PROBE_REARM_PACKETS = 8


@dataclass(slots=True)
class DriEntry:
    """Per-neighbor routing evidence."""
    from_bit: int = 0
    through_bit: int = 0
    rts: int = 0
    cts: int = 0
    check_bit: int = 0
    last_us: int = -1
    swallowed: int = 0
    checked_swallowed: int = 0


_NO_EVIDENCE = DriEntry()


class DriTable:
    """Routing-evidence rows for one owner, keyed by neighbor id.

    Bits only ever switch 0 -> 1 within an epoch; the epoch reset is the
    single place evidence is cleared, which re-arms probing for
    neighbors that were examined earlier.
    """

    __slots__ = ("entries",)

    def __init__(self) -> None:
        self.entries: dict[int, DriEntry] = {}

    def _entry(self, nbr: int) -> DriEntry:
        e = self.entries.get(nbr)
        if e is None:
            e = DriEntry()
            self.entries[nbr] = e
        return e

    def get(self, nbr: int) -> DriEntry:
        """Read-only view; defaults to the all-zero row."""
        return self.entries.get(nbr, _NO_EVIDENCE)

    def note_receive(self, nbr: int, now_us: int) -> None:
        e = self._entry(nbr)
        e.from_bit = 1
        e.last_us = now_us
        e.swallowed = 0

    def note_forward(self, nbr: int, now_us: int) -> None:
        e = self._entry(nbr)
        e.through_bit = 1
        e.last_us = now_us
        e.swallowed += 1

    def note_attempt(self, nbr: int, granted: bool) -> None:
        e = self._entry(nbr)
        e.rts += 1
        if granted:
            e.cts += 1

    def set_check(self, nbr: int) -> None:
        e = self._entry(nbr)
        e.check_bit = 1
        e.checked_swallowed = e.swallowed

    def reset_epoch(self) -> None:
        """Clear evidence and check bits; counters and recency persist."""
        for e in self.entries.values():
            e.from_bit = 0
            e.through_bit = 0
            e.check_bit = 0
            e.swallowed = 0
            e.checked_swallowed = 0


def scan_suspects(table: DriTable, neighbors, skip=()) -> list[int]:
    """Neighbors worth probing, most suspicious first.

    Strongest signal: data was routed through the neighbor but none was
    ever seen coming out of it -- the drop-attack signature.  Weaker
    signal: no routing evidence in either direction.  A check mark from
    an earlier round this epoch silences both.
    """
    swallowed = []
    unknown = []
    for nbr in neighbors:
        if nbr in skip:
            continue
        e = table.get(nbr)
        if e.from_bit:
            continue
        if e.check_bit and \
                e.swallowed - e.checked_swallowed < PROBE_REARM_PACKETS:
            continue
        if e.through_bit:
            swallowed.append(nbr)
        else:
            unknown.append(nbr)
    swallowed.sort()
    unknown.sort()
    return swallowed + unknown


def select_cooperative_node(table: DriTable, neighbors, suspect: int,
                            skip=()) -> Optional[int]:
    """Most-active other neighbor: highest from+through, then most
    recent interaction, then lowest id.  A neighbor with no recorded
    routing history is still eligible (last resort): its duties --
    hearing the decoy route request, logging whether the probe arrived,
    answering the query -- need no prior traffic, and in a quiet corner
    of the network nobody has history.  None only when no other
    neighbor exists at all."""
    best = None
    best_key = None
    for nbr in neighbors:
        if nbr == suspect or nbr in skip:
            continue
        e = table.get(nbr)
        activity = e.from_bit + e.through_bit
        key = (activity, e.last_us, -nbr)
        if best_key is None or key > best_key:
            best_key = key
            best = nbr
    return best


def probecheck_verdict(rows: dict[int, int]) -> tuple[bool, tuple[int, ...]]:
    """Cooperative tally: rows map witness -> probes that came through.
    The suspect is confirmed malicious iff at least one witness lost
    every probe; those witnesses are the victims."""
    victims = tuple(sorted(w for w, n in rows.items() if n == 0))
    return bool(victims), victims


def detection_period_s(loss_budget: float, packet_rate: float,
                       qos_horizon_s: float, min_period_s: float,
                       max_period_s: float) -> float:
    """Probing cadence from the tolerable-loss budget.

    A flow sending ``packet_rate`` packets per second may lose at most
    ``loss_budget`` of its traffic over the QoS horizon; the number of
    tolerable lost packets divided by the send rate is the longest time
    detection may sit idle, clamped to a sane range.
    """
    if packet_rate <= 0:
        return max_period_s
    tolerable_packets = loss_budget * packet_rate * qos_horizon_s
    period = tolerable_packets / packet_rate
    return min(max_period_s, max(min_period_s, period))


# Round outcomes as they appear in trace "verdict" records.
CLEARED = "cleared"
MALICIOUS = "malicious"
NOT_CONFIRMED = "not_confirmed"
ABORTED = "aborted"


@dataclass(slots=True)
class ProbeRound:
    nonce: int
    suspect: int
    cn: int
    state: str  # awaiting_rrep | probing | querying | coop | done
    epoch: int
    est_hops: int = 2
    notified: set = field(default_factory=set)
    probe_counts: dict = field(default_factory=dict)


@dataclass(slots=True)
class _WitnessJob:
    suspect: int
    in_node: int
    epoch: int
    probes_sent: int = 0
    handed: int = 0  # probes the suspect's radio actually accepted


class Detector:
    """Per-node detection driver.

    Owns the probing state machine for the node acting as initiator,
    plus the small amounts of state the node keeps when acting as probe
    destination or cooperative witness.  All network interaction goes
    through the owning node object.
    """

    def __init__(self, node, cfg):
        self.node = node
        self.engine = node.engine
        self.k = cfg.detection_k
        self.period_us = to_us(detection_period_s(
            cfg.detection_loss_budget, cfg.traffic_packet_rate,
            cfg.detection_qos_horizon_s, cfg.detection_min_period_s,
            cfg.detection_max_period_s))
        self.epoch_us = to_us(cfg.detection_epoch_s)
        self.rrep_wait_us = to_us(cfg.detection_rrep_wait_ms / 1e3)
        self.probe_grace_us = to_us(cfg.detection_probe_grace_ms / 1e3)
        self.coop_window_us = to_us(cfg.detection_coop_window_ms / 1e3)
        self.probe_gap_us = to_us(cfg.detection_probe_gap_ms / 1e3)
        self.flood_ttl = cfg.detection_flood_ttl
        self.net_ttl = cfg.routing_net_ttl

        self.active: Optional[ProbeRound] = None
        self.rounds: dict[int, ProbeRound] = {}
        # role: probe destination (nonce -> arrivals), with epoch stamp
        self.sink_counts: dict[int, int] = {}
        self.sink_epoch: dict[int, int] = {}
        # role: cooperative witness
        self.witness_jobs: dict[int, _WitnessJob] = {}
        # suspects to leave alone until the next epoch (aborted rounds)
        self.deferred: dict[int, int] = {}
        # probe destinations that swallowed a query; shunned this epoch
        self.bad_cns: set[int] = set()
        self._attempts_left = 0

    # ------------------------------------------------------------------
    # lifecycle

    def start(self) -> None:
        jitter_s = self.engine.rngs.stream(f"detect.{self.node.id}").uniform(0.0, 1.0)
        self.engine.schedule_in(self.period_us + to_us(jitter_s), self._tick)
        self.engine.schedule_in(self.epoch_us + to_us(jitter_s), self._epoch_tick)

    def current_epoch(self) -> int:
        return self.engine.now // self.epoch_us

    def _epoch_tick(self) -> None:
        self.node.dri.reset_epoch()
        self.deferred.clear()
        self.bad_cns.clear()
        self.engine.schedule_in(self.epoch_us, self._epoch_tick)

    def _tick(self) -> None:
        epoch = self.current_epoch()
        self.node.alarms.purge(epoch)
        self._purge_roles(epoch)
        self._attempts_left = 6
        if self.active is None:
            self._try_start_round(epoch)
        self.engine.schedule_in(self.period_us, self._tick)

    def _purge_roles(self, epoch: int) -> None:
        cutoff = epoch - 2
        for nonce in [n for n, e in self.sink_epoch.items() if e < cutoff]:
            del self.sink_epoch[nonce]
            self.sink_counts.pop(nonce, None)
        for nonce in [n for n, j in self.witness_jobs.items()
                      if j.epoch < cutoff]:
            del self.witness_jobs[nonce]

    # ------------------------------------------------------------------
    # initiator role

    def _try_start_round(self, epoch: int) -> None:
        node = self.node
        neighbors = self.engine.neighbors(node.id)
        skip = set(node.faulty.members)
        for suspect, until in self.deferred.items():
            if until >= epoch:
                skip.add(suspect)
        suspects = scan_suspects(node.dri, neighbors, skip)
        if not suspects:
            return
        suspect = suspects[0]
        cn_skip = set(node.faulty.members) | self.bad_cns
        cn = select_cooperative_node(node.dri, neighbors, suspect, cn_skip)
        if cn is None:
            return
        nonce = self.engine.next_nonce()
        rnd = ProbeRound(nonce=nonce, suspect=suspect, cn=cn,
                         state="awaiting_rrep", epoch=epoch)
        self.active = rnd
        self.rounds[nonce] = rnd
        node.start_probe_discovery(cn, self.flood_ttl)
        self.engine.schedule_in(self.rrep_wait_us, self._rrep_timeout, nonce)

    def on_rrep(self, msg, sender: int) -> None:
        """Every route reply the node receives passes through here."""
        rnd = self.active
        if rnd is None or rnd.state != "awaiting_rrep":
            return
        if sender != rnd.suspect or msg.target != rnd.cn:
            return
        rnd.est_hops = max(2, msg.hop_count + 2)
        rnd.state = "probing"
        probe = DataPacket(kind="probe", src=self.node.id, dst=rnd.cn,
                           size_bytes=PROBE_BYTES, ttl=self.net_ttl,
                           pin_next_hop=rnd.suspect, nonce=rnd.nonce)
        self.node.send_data_class(probe)
        link = self.engine.link
        wait = 2 * rnd.est_hops * link.per_hop_latency_us + self.probe_grace_us
        # allow for the relay buffering the probe behind a route discovery
        wait += to_us(self.node.discovery_timeout_s)
        self.engine.schedule_in(wait, self._probe_deadline, rnd.nonce)

    def _rrep_timeout(self, nonce: int) -> None:
        rnd = self.rounds.get(nonce)
        if rnd is None or rnd.state != "awaiting_rrep":
            return
        self._finish(rnd, ABORTED, reason="no_rrep", defer=True)

    def _probe_deadline(self, nonce: int) -> None:
        rnd = self.rounds.get(nonce)
        if rnd is None or rnd.state != "probing":
            return
        route = self._control_route(rnd.cn, rnd.suspect)
        if route is None:
            self._finish(rnd, ABORTED, reason="cn_unroutable", defer=True)
            return
        rnd.state = "querying"
        self.node.send_control("probe_query", route,
                               payload=(rnd.nonce, self.node.id))
        wait = 2 * len(route) * self.engine.link.per_hop_latency_us \
            + self.probe_grace_us
        self.engine.schedule_in(wait, self._query_timeout, nonce)

    def _query_timeout(self, nonce: int) -> None:
        rnd = self.rounds.get(nonce)
        if rnd is None or rnd.state != "querying":
            return
        # a destination that eats queries is useless as a probe target;
        # avoid it for the rest of the epoch
        self.bad_cns.add(rnd.cn)
        self._finish(rnd, ABORTED, reason="no_query_reply", defer=True)

    def on_probe_reply(self, payload) -> None:
        nonce, received = payload
        rnd = self.rounds.get(nonce)
        if rnd is None or rnd.state != "querying":
            return
        if received:
            self.node.dri.set_check(rnd.suspect)
            self._finish(rnd, CLEARED)
        else:
            self._start_coop(rnd)

    # ------------------------------------------------------------------
    # cooperative stage (initiator side)

    def _start_coop(self, rnd: ProbeRound) -> None:
        rnd.state = "coop"
        witnesses = [w for w in self.engine.neighbors(rnd.suspect)
                     if w != self.node.id and w not in self.node.faulty]
        sent = 0
        for w in witnesses:
            route = self._control_route(w, rnd.suspect)
            if route is None:
                continue
            self.node.send_control(
                "coop_request", route,
                payload=(rnd.nonce, self.node.id, rnd.suspect))
            sent += 1
        if sent == 0:
            self.node.dri.set_check(rnd.suspect)
            self._finish(rnd, NOT_CONFIRMED, reason="no_witnesses")
            return
        self.engine.schedule_in(self.coop_window_us, self._conclude_coop,
                                rnd.nonce)

    def on_notify(self, payload) -> None:
        """Witness participation report.  Only witnesses whose probes
        were all accepted by the suspect's radio become tally rows:
        a probe the suspect never physically received is mobility, not
        evidence."""
        nonce, witness, handed = payload
        rnd = self.rounds.get(nonce)
        if rnd is not None and rnd.state == "coop" \
                and handed >= FURTHER_PROBE_ATTEMPTS:
            rnd.notified.add(witness)
            rnd.probe_counts.setdefault(witness, 0)

    def on_probe_arrival(self, pkt: DataPacket, sender: int) -> None:
        """Data-class probe addressed to this node came through."""
        if pkt.kind == "probe":
            # role: probe destination for someone's local round
            if pkt.nonce in self.sink_counts:
                self.sink_counts[pkt.nonce] += 1
            else:
                self.sink_counts[pkt.nonce] = 1
                self.sink_epoch[pkt.nonce] = self.current_epoch()
        elif pkt.kind == "further_probe":
            rnd = self.rounds.get(pkt.nonce)
            if rnd is not None and rnd.state == "coop":
                rnd.probe_counts[pkt.src] = rnd.probe_counts.get(pkt.src, 0) + 1

    def _conclude_coop(self, nonce: int) -> None:
        rnd = self.rounds.get(nonce)
        if rnd is None or rnd.state != "coop":
            return
        rows = {w: rnd.probe_counts.get(w, 0) for w in rnd.notified}
        malicious, victims = probecheck_verdict(rows)
        self.node.dri.set_check(rnd.suspect)
        if rnd.suspect not in self.engine.neighbors(self.node.id):
            # the whole experiment presumes witness probes reach us in
            # one hop from the suspect; if it drifted out of range the
            # missing probes are mobility, not guilt
            self._finish(rnd, NOT_CONFIRMED, reason="suspect_moved")
            return
        if not malicious:
            self._finish(rnd, NOT_CONFIRMED, reason="probes_arrived")
            return
        epoch = self.current_epoch()
        self._finish(rnd, MALICIOUS, victims=victims)
        self.node.raise_alarm(rnd.suspect, epoch, rnd.nonce)
        notice = (rnd.suspect, epoch, rnd.nonce)
        cn_route = self._control_route(rnd.cn, rnd.suspect)
        if cn_route is not None:
            self.node.send_control("verdict_notice", cn_route,
                                   payload=notice + ("cn",))
        for w in victims:
            route = self._control_route(w, rnd.suspect)
            if route is not None:
                self.node.send_control("verdict_notice", route,
                                       payload=notice + ("witness",))

    def _finish(self, rnd: ProbeRound, outcome: str, reason: str = "",
                victims=(), defer: bool = False) -> None:
        rnd.state = "done"
        if defer:
            self.deferred[rnd.suspect] = rnd.epoch
        extra = {"nonce": rnd.nonce}
        if reason:
            extra["reason"] = reason
        if victims:
            extra["victims"] = ";".join(str(v) for v in victims)
        self.engine.trace.emit(self.engine.now, "verdict", self.node.id,
                               rnd.suspect, outcome, None, extra)
        del self.rounds[rnd.nonce]
        if self.active is rnd:
            self.active = None
            # keep examining suspects back to back until the period's
            # round budget runs out instead of idling between ticks
            if self._attempts_left > 0:
                self._attempts_left -= 1
                self._try_start_round(self.current_epoch())

    def _control_route(self, dst: int, suspect: int):
        """Relay path to dst for detection control traffic.

        Prefers a path that avoids the suspect so the party under
        examination never even carries the coordination messages.  When
        the suspect is a cut vertex and no such path exists, fall back
        to a path through it: the drop attack only swallows data-class
        packets, so a control message survives the crossing, and
        skipping the round entirely would leave every node behind a
        cut-vertex attacker permanently unexaminable.  Convicted nodes
        are never used as relays.  None when dst is unreachable."""
        exclude = set(self.node.faulty.members)
        route = self.engine.bfs_route(self.node.id, dst,
                                      exclude | {suspect})
        if route is None:
            route = self.engine.bfs_route(self.node.id, dst, exclude)
        return tuple(route) if route else None

    # ------------------------------------------------------------------
    # probe destination role

    def on_probe_query(self, payload, route) -> None:
        nonce, initiator = payload
        received = self.sink_counts.get(nonce, 0) > 0
        if nonce not in self.sink_epoch:
            self.sink_epoch[nonce] = self.current_epoch()
            self.sink_counts.setdefault(nonce, 0)
        back = tuple(reversed(route))
        self.node.send_control("probe_reply", back, payload=(nonce, received))

    # ------------------------------------------------------------------
    # witness role

    def on_coop_request(self, payload) -> None:
        nonce, initiator, suspect = payload
        if suspect in self.node.faulty:
            return
        if not self.engine.adjacent(self.node.id, suspect):
            return
        self.witness_jobs[nonce] = _WitnessJob(
            suspect=suspect, in_node=initiator, epoch=self.current_epoch())
        self.node.start_probe_discovery(suspect, self.flood_ttl)
        settle = to_us(0.1)
        for attempt in range(FURTHER_PROBE_ATTEMPTS):
            self.engine.schedule_in(settle + attempt * self.probe_gap_us,
                                    self._send_further_probe, nonce, attempt)
        self.engine.schedule_in(
            settle + FURTHER_PROBE_ATTEMPTS * self.probe_gap_us,
            self._finish_witness, nonce)

    def _send_further_probe(self, nonce: int, attempt: int) -> None:
        job = self.witness_jobs.get(nonce)
        if job is None or job.suspect in self.node.faulty:
            return
        probe = DataPacket(kind="further_probe", src=self.node.id,
                           dst=job.in_node, size_bytes=PROBE_BYTES,
                           ttl=self.net_ttl, pin_next_hop=job.suspect,
                           nonce=nonce, attempt=attempt)
        outcome = self.node.send_data_class(probe)
        job.probes_sent += 1
        if outcome == "delivered":
            job.handed += 1

    def _finish_witness(self, nonce: int) -> None:
        """Report participation to the initiator once all probes are out."""
        job = self.witness_jobs.get(nonce)
        if job is None:
            return
        route = self._control_route(job.in_node, job.suspect)
        if route is None:
            return
        self.node.send_control("notify", route,
                               payload=(nonce, self.node.id, job.handed))

    # ------------------------------------------------------------------
    # co-signing

    def on_verdict_notice(self, payload, route) -> None:
        """Co-sign request.  Sign only with matching first-hand state:
        as probe destination, a recorded zero arrival count for the
        round; as witness, full participation with every probe accepted
        by the suspect's radio."""
        suspect, epoch, nonce, role = payload
        if role == "cn":
            if self.sink_counts.get(nonce, 0) != 0 \
                    or nonce not in self.sink_epoch:
                return
        elif role == "witness":
            job = self.witness_jobs.get(nonce)
            if job is None or job.suspect != suspect:
                return
            if job.probes_sent < FURTHER_PROBE_ATTEMPTS \
                    or job.handed < FURTHER_PROBE_ATTEMPTS:
                return
        else:
            return
        alarm = self.node.raise_alarm(suspect, epoch, nonce)
        back = tuple(reversed(route))
        if len(back) > 1:
            self.node.send_control("alarm_direct", back, payload=(alarm,))
