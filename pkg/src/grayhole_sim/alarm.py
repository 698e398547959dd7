"""Threshold alarms, the signature scheme and the shared faulty list.

A single accuser can never convict: a suspect is committed to the
faulty list only when at least ``k`` distinct accusers produced validly
signed alarms for the same (suspect, epoch) pair.  Incomplete alarm
sets expire after a few epochs so stale accusations cannot pool
forever.  Committed entries travel with their aggregate as proof, and a
receiver re-verifies the proof before adopting the entry, which is what
makes a forged or partial list harmless.
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
from dataclasses import dataclass, field
from typing import Optional

from .messages import AlarmMessage, FaultyAttachment


class SignatureScheme:
    """Simulation-grade HMAC signatures with per-node secret keys.

    Keys are derived from the run seed, so signatures are deterministic
    across runs.  A node can only produce signatures through its own
    id's key (enforced by call sites), so accusations cannot be forged
    on behalf of another node.
    """

    def __init__(self, seed: int):
        self._seed = int(seed)
        self._keys: dict[int, bytes] = {}

    def _key(self, node_id: int) -> bytes:
        key = self._keys.get(node_id)
        if key is None:
            key = hashlib.sha256(f"{self._seed}/sigkey/{node_id}".encode()).digest()
            self._keys[node_id] = key
        return key

    @staticmethod
    def canonical(suspect: int, epoch: int, accuser: int, nonce: int) -> bytes:
        return f"alarm|{suspect}|{epoch}|{accuser}|{nonce}".encode()

    def sign_alarm(self, accuser: int, suspect: int, epoch: int,
                   nonce: int) -> AlarmMessage:
        msg = self.canonical(suspect, epoch, accuser, nonce)
        sig = hmac_mod.new(self._key(accuser), msg, hashlib.sha256).hexdigest()
        return AlarmMessage(suspect=suspect, accuser=accuser, epoch=epoch,
                            evidence_nonce=nonce, signature=sig)

    def verify(self, alarm: AlarmMessage) -> bool:
        msg = self.canonical(alarm.suspect, alarm.epoch, alarm.accuser,
                             alarm.evidence_nonce)
        want = hmac_mod.new(self._key(alarm.accuser), msg,
                            hashlib.sha256).hexdigest()
        return hmac_mod.compare_digest(want, alarm.signature)


@dataclass(frozen=True, slots=True)
class AlarmAggregate:
    """Immutable bundle of >= k verified alarms for one (suspect, epoch)."""
    suspect: int
    epoch: int
    alarms: tuple  # of AlarmMessage, distinct accusers, ascending id

    @property
    def accusers(self) -> tuple[int, ...]:
        return tuple(a.accuser for a in self.alarms)


def build_aggregate(alarms, scheme: SignatureScheme) -> AlarmAggregate:
    """Pure aggregation: dedupe accusers, verify every signature, and
    require a single (suspect, epoch).  Raises ValueError on mixed input."""
    by_accuser: dict[int, AlarmMessage] = {}
    suspect = epoch = None
    for alarm in alarms:
        if suspect is None:
            suspect, epoch = alarm.suspect, alarm.epoch
        elif (alarm.suspect, alarm.epoch) != (suspect, epoch):
            raise ValueError("alarms span multiple (suspect, epoch) pairs")
        if alarm.accuser in by_accuser:
            continue
        if scheme.verify(alarm):
            by_accuser[alarm.accuser] = alarm
    if suspect is None:
        raise ValueError("no alarms to aggregate")
    ordered = tuple(by_accuser[a] for a in sorted(by_accuser))
    return AlarmAggregate(suspect=suspect, epoch=epoch, alarms=ordered)


def verify_aggregate(agg: AlarmAggregate, k: int,
                     scheme: SignatureScheme) -> bool:
    """True iff the aggregate holds >= k alarms from distinct accusers,
    all correctly signed and all naming the aggregate's (suspect, epoch).
    The suspect itself never counts as an accuser."""
    seen = set()
    for alarm in agg.alarms:
        if alarm.suspect != agg.suspect or alarm.epoch != agg.epoch:
            return False
        if alarm.accuser == agg.suspect or alarm.accuser in seen:
            return False
        if not scheme.verify(alarm):
            return False
        seen.add(alarm.accuser)
    return len(seen) >= k


class FaultyList:
    """Append-only conviction list with per-member proof aggregates.

    The version increments on every commit; snapshots for piggybacking
    are cached until the version changes so attaching one to every
    routing packet costs nothing."""

    __slots__ = ("members", "proofs", "version", "_member_set", "_snapshot")

    def __init__(self) -> None:
        self.members: list[int] = []
        self.proofs: dict[int, AlarmAggregate] = {}
        self.version = 0
        self._member_set: set[int] = set()
        self._snapshot: Optional[FaultyAttachment] = None

    def __contains__(self, node_id: int) -> bool:
        return node_id in self._member_set

    def __len__(self) -> int:
        return len(self.members)

    def add(self, member: int, proof: AlarmAggregate) -> bool:
        if member in self._member_set:
            return False
        self.members.append(member)
        self._member_set.add(member)
        self.proofs[member] = proof
        self.version += 1
        self._snapshot = None
        return True

    def snapshot(self) -> Optional[FaultyAttachment]:
        """Piggyback attachment, or None while the list is empty."""
        if not self.members:
            return None
        if self._snapshot is None:
            members = tuple(self.members)
            self._snapshot = FaultyAttachment(
                version=self.version,
                members=members,
                proofs=tuple(self.proofs[m] for m in members))
        return self._snapshot


@dataclass(slots=True)
class _PendingSet:
    epoch: int
    by_accuser: dict = field(default_factory=dict)


class AlarmBook:
    """Per-node store of not-yet-complete alarms.

    ``add`` returns a complete aggregate exactly once, at the moment the
    k-th distinct verified accuser arrives for a (suspect, epoch) pair.
    """

    __slots__ = ("k", "scheme", "expiry_epochs", "_pending", "_done")

    def __init__(self, k: int, scheme: SignatureScheme, expiry_epochs: int = 3):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.scheme = scheme
        self.expiry_epochs = expiry_epochs
        self._pending: dict[tuple[int, int], _PendingSet] = {}
        self._done: set[tuple[int, int]] = set()

    def add(self, alarm: AlarmMessage) -> Optional[AlarmAggregate]:
        key = (alarm.suspect, alarm.epoch)
        if key in self._done:
            return None
        if alarm.accuser == alarm.suspect or not self.scheme.verify(alarm):
            return None
        entry = self._pending.get(key)
        if entry is None:
            entry = _PendingSet(epoch=alarm.epoch)
            self._pending[key] = entry
        if alarm.accuser in entry.by_accuser:
            return None
        entry.by_accuser[alarm.accuser] = alarm
        if len(entry.by_accuser) >= self.k:
            agg = build_aggregate(entry.by_accuser.values(), self.scheme)
            self._done.add(key)
            del self._pending[key]
            return agg
        return None

    def purge(self, current_epoch: int) -> None:
        """Drop incomplete alarm sets older than the expiry window."""
        cutoff = current_epoch - self.expiry_epochs
        stale = [key for key, entry in self._pending.items()
                 if entry.epoch < cutoff]
        for key in stale:
            del self._pending[key]
