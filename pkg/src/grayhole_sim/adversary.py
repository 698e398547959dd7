"""Selective packet droppers.

A compromised node alternates between a well-behaved phase and an
attacking phase driven by a two-state Markov chain.  While attacking it
advertises itself into routes by answering route requests with a forged
one-hop reply whose destination sequence number outbids every honest
answer, and it discards data-class packets at its current drop rate.
While well-behaved it routes like any other node.  Control traffic is
always forwarded so the node stays inconspicuous at the routing layer.
Optional refinements: a victim list restricts drops to selected flow
endpoints, colluders never drop each other's traffic, and bad-mouthing
colluders flood signed accusations against an honest target every
detection epoch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .engine import to_us
from .messages import DATA_CLASS, Rrep, SPURIOUS_SEQ

GOOD = "good"
BAD = "bad"


@dataclass(slots=True)
class GrayholeState:
    """Markov phase machine plus targeting configuration."""
    p_good_to_bad: float
    p_bad_to_good: float
    min_drop_rate: float
    max_drop_rate: float
    phase: str = GOOD
    drop_rate: float = 0.0
    victims: frozenset = frozenset()
    colluders: frozenset = frozenset()


def resample_drop_rate(state: GrayholeState, rng) -> float:
    """New per-phase drop rate, drawn uniformly from the configured band."""
    state.drop_rate = rng.uniform(state.min_drop_rate, state.max_drop_rate)
    return state.drop_rate


def phase_transition(state: GrayholeState, rng) -> str:
    """One phase-clock tick.  Always consumes exactly one uniform draw
    for the transition decision, so trace determinism does not depend
    on the current phase."""
    u = rng.random()
    if state.phase == GOOD:
        if u < state.p_good_to_bad:
            state.phase = BAD
            resample_drop_rate(state, rng)
    else:
        if u < state.p_bad_to_good:
            state.phase = GOOD
    return state.phase


def drop_decision(state: GrayholeState, pkt, rng) -> bool:
    """Whether to discard a data-class packet currently being relayed."""
    if pkt.kind not in DATA_CLASS:
        return False
    if state.phase == GOOD:
        return False
    if pkt.src in state.colluders or pkt.dst in state.colluders:
        return False
    if state.victims and pkt.src not in state.victims \
            and pkt.dst not in state.victims:
        return False
    return rng.random() < state.drop_rate


class GrayholeBehavior:
    """Wires a gray-hole state machine to a node.

    The node consults :meth:`should_drop` for every data-class packet it
    would otherwise relay and :meth:`forge_rrep` for every route request
    it overhears.  The phase clock and the optional bad-mouthing clock
    are scheduled on the owning engine.
    """

    def __init__(self, node, cfg, *, colluders=frozenset(),
                 badmouth_target: Optional[int] = None):
        self.node = node
        self.engine = node.engine
        self.rng = node.engine.rngs.stream(f"adversary.{node.id}")
        self.state = GrayholeState(
            p_good_to_bad=cfg.adversary_p_good_to_bad,
            p_bad_to_good=cfg.adversary_p_bad_to_good,
            min_drop_rate=cfg.adversary_min_drop_rate,
            max_drop_rate=cfg.adversary_max_drop_rate,
            victims=frozenset(cfg.adversary_victims),
            colluders=frozenset(c for c in colluders if c != node.id),
        )
        if cfg.adversary_start_phase == BAD or (
                cfg.adversary_start_phase == "random"
                and self.rng.random() < 0.5):
            self.state.phase = BAD
            resample_drop_rate(self.state, self.rng)
        self.phase_tick_us = to_us(cfg.adversary_phase_tick_s)
        self.badmouth_target = badmouth_target
        self.badmouth_every_us = to_us(cfg.detection_epoch_s)

    def start(self) -> None:
        self.engine.schedule_in(self.phase_tick_us, self._phase_tick)
        if self.badmouth_target is not None:
            self.engine.schedule_in(to_us(1.0), self._badmouth_tick)

    def _phase_tick(self) -> None:
        phase_transition(self.state, self.rng)
        self.engine.schedule_in(self.phase_tick_us, self._phase_tick)

    def should_drop(self, pkt) -> bool:
        return drop_decision(self.state, pkt, self.rng)

    def should_forge(self) -> bool:
        """The lure is part of the attack: while well-behaved the node
        routes like anyone else and only a misbehaving node answers
        requests with fabricated routes."""
        return self.state.phase == BAD

    def forge_rrep(self, rreq) -> Rrep:
        """Claim a fresh one-hop route to whatever was asked for.

        The forged sequence always outbids whatever freshness the
        requester demanded, so the lie keeps winning route selection no
        matter how often earlier lies were invalidated.
        """
        seq = max(SPURIOUS_SEQ, rreq.requested_seq + SPURIOUS_SEQ // 1024)
        return Rrep(origin=rreq.origin, target=rreq.target, hop_count=1,
                    target_seq=seq, lifetime_s=10.0)

    def _badmouth_tick(self) -> None:
        """Forge an accusation against the configured honest target and
        push it to everyone in earshot.  Signatures are genuine (the
        colluder owns its key); the claim is not."""
        epoch = self.engine.now // self.badmouth_every_us
        alarm = self.node.scheme.sign_alarm(
            accuser=self.node.id, suspect=self.badmouth_target,
            epoch=epoch, nonce=0)
        self.engine.broadcast(self.node.id, alarm)
        self.engine.schedule_in(self.badmouth_every_us, self._badmouth_tick)
