"""Secured beaconing with certificate omission and budgeted verification.

Senders sign every beacon under their active pseudonym but attach the
pseudonym certificate only when an omission strategy says so: always, every
alpha-th beacon, or when a new neighbor has appeared since the last own
beacon. After a pseudonym change the certificate rides on the next beta
beacons regardless of strategy, so neighbors can pick up the new identity
quickly.

Receivers keep a neighbor table keyed by short pseudonym ids, cache verified
certificates, and push all cryptographic checks through a budgeted FIFO
verification queue (a few dozen verifications per second is all a realistic
onboard unit can afford). Beacons reach the application only after their
signature, and on first contact the sender's certificate, have verified:
unverified traffic stays pending and is never delivered.

Wire format of a secured beacon (fixed sizes): 2-byte type tag, 4-byte
pseudonym id, 40-byte beacon body, 72-byte timestamped signature, 1-byte
certificate-present flag, optional 142-byte certificate.
"""

from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .hsm import SIGNED_BLOB_LEN, Hsm, SignedBlob
from .identity import (
    CERT_WIRE_LEN,
    PSEUDONYM_ID_LEN,
    CompactCertificate,
    IdentityManager,
    MalformedCertificateError,
    PseudonymChangeEvent,
    PseudonymChangePolicy,
    verify_certificate,
)
from .suites import P224Suite, SignatureSuite

PLAIN_BEACON_TYPE = 0x0B00
SECURED_BEACON_TYPE = 0x0B01

BEACON_BODY_LEN = 40
_BEACON_FMT = ">ddffQ8s"

# tag + pseudonym id + beacon + signed blob + certificate flag
SECURED_BEACON_LEN = 2 + PSEUDONYM_ID_LEN + BEACON_BODY_LEN + SIGNED_BLOB_LEN + 1
SECURED_BEACON_WITH_CERT_LEN = SECURED_BEACON_LEN + CERT_WIRE_LEN
PLAIN_BEACON_LEN = 2 + BEACON_BODY_LEN

EMERGENCY_BRAKE_FLAG = 0x01


class BeaconingError(Exception):
    pass


class MalformedBeaconError(BeaconingError, ValueError):
    pass


class NoActivePseudonymError(BeaconingError):
    pass


@dataclass(frozen=True)
class Beacon:
    """One cooperative-awareness message: position, motion, time, payload.

    The payload is a fixed 8 bytes on the wire; shorter values are zero
    padded at construction so equality survives a round trip.
    """

    x: float
    y: float
    velocity: float
    heading: float
    generation_time: int
    payload: bytes = b""

    def __post_init__(self) -> None:
        if len(self.payload) > 8:
            raise MalformedBeaconError("payload exceeds 8 bytes")
        if len(self.payload) < 8:
            object.__setattr__(self, "payload", self.payload.ljust(8, b"\x00"))

    def pack(self) -> bytes:
        return struct.pack(_BEACON_FMT, self.x, self.y, self.velocity,
                           self.heading, self.generation_time, self.payload)

    @classmethod
    def unpack(cls, data: bytes) -> "Beacon":
        if len(data) != BEACON_BODY_LEN:
            raise MalformedBeaconError(f"beacon body must be {BEACON_BODY_LEN}B")
        x, y, vel, heading, gen, payload = struct.unpack(_BEACON_FMT, data)
        return cls(x=x, y=y, velocity=vel, heading=heading,
                   generation_time=gen, payload=payload)


# -- certificate omission -------------------------------------------------------


class OmissionVariant(Enum):
    ALWAYS = "always"
    PERIODIC = "periodic"
    NEIGHBOR_TRIGGERED = "neighbor_triggered"


@dataclass(frozen=True)
class OmissionStrategy:
    """Certificate attachment policy: one variant plus alpha/beta parameters."""

    variant: OmissionVariant
    alpha: int = 1
    beta: int = 0

    def __post_init__(self) -> None:
        if self.alpha < 1:
            raise BeaconingError("alpha must be >= 1")
        if self.beta < 0:
            raise BeaconingError("beta must be >= 0")

    @classmethod
    def always(cls) -> "OmissionStrategy":
        return cls(OmissionVariant.ALWAYS)

    @classmethod
    def periodic(cls, alpha: int, beta: int = 0) -> "OmissionStrategy":
        return cls(OmissionVariant.PERIODIC, alpha=alpha, beta=beta)

    @classmethod
    def neighbor_triggered(cls, beta: int = 0) -> "OmissionStrategy":
        return cls(OmissionVariant.NEIGHBOR_TRIGGERED, beta=beta)


def decide_attach(strategy: OmissionStrategy, beacons_sent: int,
                  beta_remaining: int, new_neighbor_seen: bool) -> bool:
    """Pure attachment decision for the next beacon.

    ``beacons_sent`` counts beacons already sent (the periodic variant
    attaches on counts 0, alpha, 2*alpha, ...). ``beta_remaining`` forces
    attachment right after a pseudonym change, whatever the variant.
    """
    if beta_remaining > 0:
        return True
    if strategy.variant is OmissionVariant.ALWAYS:
        return True
    if strategy.variant is OmissionVariant.PERIODIC:
        return beacons_sent % strategy.alpha == 0
    return new_neighbor_seen


# -- secured beacon wire format ----------------------------------------------------


class SecuredBeacon:
    """A beacon plus its pseudonymous signature and optional certificate."""

    __slots__ = ("beacon", "signer_pseudonym_id", "blob", "certificate",
                 "_beacon_bytes", "signed_payload")

    def __init__(self, beacon: Beacon, signer_pseudonym_id: bytes,
                 blob: SignedBlob, certificate: CompactCertificate | None,
                 beacon_bytes: bytes | None = None) -> None:
        self.beacon = beacon
        self.signer_pseudonym_id = signer_pseudonym_id
        self.blob = blob
        self.certificate = certificate
        self._beacon_bytes = beacon_bytes if beacon_bytes is not None else beacon.pack()
        # exactly the bytes the signature covers, computed once per beacon
        # rather than at every receiving verifier
        self.signed_payload = self._beacon_bytes + struct.pack(">Q", blob.timestamp)

    @property
    def beacon_bytes(self) -> bytes:
        return self._beacon_bytes

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, SecuredBeacon)
            and self.beacon == other.beacon
            and self.signer_pseudonym_id == other.signer_pseudonym_id
            and self.blob == other.blob
            and self.certificate == other.certificate
        )

    def to_bytes(self) -> bytes:
        """Body without the 2-byte type tag (the hook message body)."""
        parts = [self.signer_pseudonym_id, self._beacon_bytes, self.blob.to_bytes()]
        if self.certificate is not None:
            parts.append(b"\x01")
            parts.append(self.certificate.to_bytes())
        else:
            parts.append(b"\x00")
        return b"".join(parts)

    def to_wire(self) -> bytes:
        return struct.pack(">H", SECURED_BEACON_TYPE) + self.to_bytes()

    @classmethod
    def from_bytes(cls, body: bytes) -> "SecuredBeacon":
        base = PSEUDONYM_ID_LEN + BEACON_BODY_LEN + SIGNED_BLOB_LEN + 1
        if len(body) not in (base, base + CERT_WIRE_LEN):
            raise MalformedBeaconError(f"secured beacon body of {len(body)}B")
        pid = body[:PSEUDONYM_ID_LEN]
        off = PSEUDONYM_ID_LEN
        beacon_bytes = body[off:off + BEACON_BODY_LEN]
        beacon = Beacon.unpack(beacon_bytes)
        off += BEACON_BODY_LEN
        try:
            blob = SignedBlob.from_bytes(body[off:off + SIGNED_BLOB_LEN])
        except ValueError as exc:
            raise MalformedBeaconError(str(exc)) from exc
        off += SIGNED_BLOB_LEN
        flag = body[off]
        off += 1
        if flag == 0x00:
            if len(body) != base:
                raise MalformedBeaconError("certificate flag clear but trailing bytes present")
            cert = None
        elif flag == 0x01:
            if len(body) != base + CERT_WIRE_LEN:
                raise MalformedBeaconError("certificate flag set but certificate missing")
            try:
                cert = CompactCertificate.from_bytes(body[off:])
            except MalformedCertificateError as exc:
                raise MalformedBeaconError(str(exc)) from exc
        else:
            raise MalformedBeaconError(f"bad certificate flag {flag:#x}")
        return cls(beacon, pid, blob, cert, beacon_bytes=beacon_bytes)

    @classmethod
    def from_wire(cls, data: bytes) -> "SecuredBeacon":
        if len(data) < 2 or struct.unpack(">H", data[:2])[0] != SECURED_BEACON_TYPE:
            raise MalformedBeaconError("not a secured beacon")
        return cls.from_bytes(data[2:])


# -- neighbor table ----------------------------------------------------------------


class NeighborEntry:
    __slots__ = ("pseudonym_id", "first_seen", "last_seen", "heading",
                 "verified", "certificate", "public_key")

    def __init__(self, pseudonym_id: bytes, now: int, heading: float) -> None:
        self.pseudonym_id = pseudonym_id
        self.first_seen = now
        self.last_seen = now
        self.heading = heading
        self.verified = False
        self.certificate: CompactCertificate | None = None
        self.public_key: bytes | None = None


class NeighborTable:
    """Pseudonym-keyed table of recently heard senders.

    Entries appear on first reception (verified or not), refresh their
    timestamp on every beacon, and expire strictly after ``expiry_ms`` of
    silence. The table also remembers whether any new neighbor appeared since
    the owner last sent a beacon, which drives the neighbor-triggered
    omission variant.
    """

    def __init__(self, expiry_ms: int = 3000) -> None:
        if expiry_ms <= 0:
            raise BeaconingError("expiry must be positive")
        self.expiry_ms = expiry_ms
        self.entries: dict[bytes, NeighborEntry] = {}
        self._new_since_mark = False

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, pseudonym_id: bytes) -> NeighborEntry | None:
        return self.entries.get(pseudonym_id)

    def observe(self, pseudonym_id: bytes, now: int, heading: float) -> NeighborEntry:
        entry = self.entries.get(pseudonym_id)
        if entry is None:
            entry = NeighborEntry(pseudonym_id, now, heading)
            self.entries[pseudonym_id] = entry
            self._new_since_mark = True
        else:
            if now > entry.last_seen:
                entry.last_seen = now
            entry.heading = heading
        return entry

    def mark_beacon_sent(self) -> None:
        self._new_since_mark = False

    @property
    def new_since_mark(self) -> bool:
        return self._new_since_mark

    def sweep(self, now: int) -> list[bytes]:
        """Drop entries silent for longer than the expiry; returns their ids."""
        horizon = now - self.expiry_ms
        expired = [pid for pid, e in self.entries.items() if e.last_seen < horizon]
        for pid in expired:
            del self.entries[pid]
        return expired


# -- budgeted verification -----------------------------------------------------------


class VerificationBudget:
    """Sliding-window cap on verification units (1 unit = 1 crypto check)."""

    __slots__ = ("max_per_second", "_window", "_sum")

    def __init__(self, max_per_second: int) -> None:
        if max_per_second < 1:
            raise BeaconingError("budget must be at least 1 per second")
        self.max_per_second = max_per_second
        self._window: deque[tuple[int, int]] = deque()
        self._sum = 0

    def available(self, now: int) -> int:
        window = self._window
        horizon = now - 1000
        while window and window[0][0] <= horizon:
            self._sum -= window.popleft()[1]
        return self.max_per_second - self._sum

    def consume(self, now: int, units: int) -> None:
        self._window.append((now, units))
        self._sum += units


_JOB_SIG = 0
_JOB_CERT_SIG = 1

_JOB_QUEUED = 0
_JOB_VERIFIED = 1
_JOB_FAILED = 2


class _Job:
    __slots__ = ("kind", "sb", "public_key", "enqueued_at", "state", "fail_reason")

    def __init__(self, kind: int, sb: SecuredBeacon, public_key: bytes | None,
                 enqueued_at: int) -> None:
        self.kind = kind
        self.sb = sb
        self.public_key = public_key
        self.enqueued_at = enqueued_at
        self.state = _JOB_QUEUED
        self.fail_reason: str | None = None

    @property
    def units(self) -> int:
        return 2 if self.kind == _JOB_CERT_SIG else 1


# -- receive dispositions ----------------------------------------------------------


class ReceiveStatus(Enum):
    DELIVERED = "delivered"
    PENDING = "pending"
    DISCARDED = "discarded"


@dataclass(frozen=True)
class ReceiveDisposition:
    status: ReceiveStatus
    reason: str | None = None


DELIVERED = ReceiveDisposition(ReceiveStatus.DELIVERED)
PENDING_QUEUED = ReceiveDisposition(ReceiveStatus.PENDING, "queued")
PENDING_AWAITING_CERT = ReceiveDisposition(ReceiveStatus.PENDING, "awaiting_certificate")
DISCARD_STALE = ReceiveDisposition(ReceiveStatus.DISCARDED, "stale")
DISCARD_OPPOSITE = ReceiveDisposition(ReceiveStatus.DISCARDED, "opposite_flow")
DISCARD_BAD_SIGNATURE = ReceiveDisposition(ReceiveStatus.DISCARDED, "bad_signature")
DISCARD_BAD_CERTIFICATE = ReceiveDisposition(ReceiveStatus.DISCARDED, "bad_certificate")


def discard_malformed(detail: str) -> ReceiveDisposition:
    return ReceiveDisposition(ReceiveStatus.DISCARDED, f"malformed: {detail}")


DeliverCallback = Callable[[SecuredBeacon, int], None]


# -- the beaconing security service ----------------------------------------------------


class BeaconSecurity:
    """Per-vehicle send and receive security processing for beacons.

    All methods take explicit times in ms so a simulation can drive many
    instances deterministically. Delivery to the application happens only
    through the ``deliver`` callback, and only for beacons whose signature
    chain has fully verified (the trust gate).
    """

    def __init__(
        self,
        hsm: Hsm,
        identity: IdentityManager,
        issuer_public_key: bytes,
        strategy: OmissionStrategy,
        deliver: DeliverCallback | None = None,
        neighbor_expiry_ms: int = 3000,
        budget_per_second: int = 50,
        queue_capacity: int = 64,
        pending_capacity: int = 64,
        freshness_window_ms: int = 1000,
        opposite_flow_filter: bool = False,
        suite: SignatureSuite | None = None,
    ) -> None:
        if queue_capacity < 1 or pending_capacity < 1:
            raise BeaconingError("capacities must be positive")
        self.hsm = hsm
        self.identity = identity
        self.issuer_public_key = issuer_public_key
        self.strategy = strategy
        self.deliver = deliver
        self.neighbors = NeighborTable(neighbor_expiry_ms)
        self.budget = VerificationBudget(budget_per_second)
        self.queue_capacity = queue_capacity
        self.pending_capacity = pending_capacity
        self.freshness_window_ms = freshness_window_ms
        self.opposite_flow_filter = opposite_flow_filter
        self.suite = suite if suite is not None else P224Suite()
        self.own_heading = 0.0
        self._queue: deque[_Job] = deque()
        self._pending: dict[bytes, deque[SecuredBeacon]] = {}
        self._beta_remaining = 0
        # counters
        self.beacons_sent = 0
        self.beacons_sent_with_cert = 0
        self.beacons_received = 0
        self.delivered_count = 0
        self.evicted_jobs = 0
        self.pending_dropped = 0
        self.units_used = 0
        self.discards: dict[str, int] = {}
        self.units_by_second: dict[int, int] = {}

    # -- sending ------------------------------------------------------------

    def on_pseudonym_change(self, event: PseudonymChangeEvent) -> None:
        """Reset the certificate-repetition counter for the fresh identity."""
        self._beta_remaining = self.strategy.beta

    def change_if_due(self, now: int, policy: PseudonymChangePolicy) -> PseudonymChangeEvent | None:
        if not self.identity.should_change(now, policy):
            return None
        event = self.identity.activate_next(now, policy)
        self.on_pseudonym_change(event)
        return event

    def make_beacon(self, beacon: Beacon, now: int) -> SecuredBeacon:
        """Sign a beacon under the active pseudonym, attaching the certificate
        when the omission strategy calls for it."""
        active = self.identity.active
        if active is None:
            raise NoActivePseudonymError("no active pseudonym")
        attach = decide_attach(self.strategy, self.beacons_sent,
                               self._beta_remaining, self.neighbors.new_since_mark)
        beacon_bytes = beacon.pack()
        blob = self.hsm.sign_and_timestamp(active.key_id, beacon_bytes)
        active.beacons_signed += 1
        self.beacons_sent += 1
        if self._beta_remaining > 0:
            self._beta_remaining -= 1
        self.neighbors.mark_beacon_sent()
        self.own_heading = beacon.heading
        cert = active.certificate if attach else None
        if attach:
            self.beacons_sent_with_cert += 1
        return SecuredBeacon(beacon, active.pseudonym_id, blob, cert,
                             beacon_bytes=beacon_bytes)

    # -- receiving -----------------------------------------------------------

    def receive_wire(self, data: bytes, now: int) -> ReceiveDisposition:
        try:
            sb = SecuredBeacon.from_wire(data)
        except MalformedBeaconError as exc:
            self.beacons_received += 1
            return self._discard(discard_malformed(str(exc)))
        return self.on_receive(sb, now)

    def on_receive(self, sb: SecuredBeacon, now: int) -> ReceiveDisposition:
        """Classify one received beacon and queue its verification work."""
        self.beacons_received += 1
        delta = now - sb.beacon.generation_time
        if delta > self.freshness_window_ms or -delta > self.freshness_window_ms:
            return self._discard(DISCARD_STALE)
        if self.opposite_flow_filter:
            delta_h = sb.beacon.heading - self.own_heading
            if delta_h != 0.0 and math.cos(delta_h) < 0.0:
                return self._discard(DISCARD_OPPOSITE)
        entry = self.neighbors.observe(sb.signer_pseudonym_id, now, sb.beacon.heading)
        if entry.verified:
            job = _Job(_JOB_SIG, sb, entry.public_key, now)
        elif sb.certificate is not None:
            job = _Job(_JOB_CERT_SIG, sb, None, now)
        else:
            bucket = self._pending.get(sb.signer_pseudonym_id)
            if bucket is None:
                bucket = deque()
                self._pending[sb.signer_pseudonym_id] = bucket
            if len(bucket) >= self.pending_capacity:
                bucket.popleft()
                self.pending_dropped += 1
            bucket.append(sb)
            return PENDING_AWAITING_CERT
        self._enqueue(job)
        self._drain(now)
        if job.state == _JOB_VERIFIED:
            return DELIVERED
        if job.state == _JOB_FAILED:
            # _execute already counted the discard.
            if job.fail_reason == "bad_certificate":
                return DISCARD_BAD_CERTIFICATE
            return DISCARD_BAD_SIGNATURE
        return PENDING_QUEUED

    def verification_step(self, now: int) -> None:
        """Spend whatever budget is available on the queue head."""
        self._drain(now)

    def neighbor_maintenance(self, now: int) -> list[bytes]:
        """Expire silent neighbors and drop their pending beacons."""
        expired = self.neighbors.sweep(now)
        for pid in expired:
            bucket = self._pending.pop(pid, None)
            if bucket:
                self.pending_dropped += len(bucket)
        return expired

    @property
    def queue_depth(self) -> int:
        return len(self._queue)

    @property
    def pending_count(self) -> int:
        return sum(len(b) for b in self._pending.values())

    # -- internals --------------------------------------------------------------

    def _discard(self, disposition: ReceiveDisposition) -> ReceiveDisposition:
        reason = disposition.reason or "other"
        self.discards[reason] = self.discards.get(reason, 0) + 1
        return disposition

    def _enqueue(self, job: _Job) -> None:
        queue = self._queue
        if len(queue) >= self.queue_capacity:
            queue.popleft()
            self.evicted_jobs += 1
        queue.append(job)

    def _drain(self, now: int) -> None:
        queue = self._queue
        if not queue:
            return
        avail = self.budget.available(now)
        while queue:
            job = queue[0]
            need = 2 if job.kind == _JOB_CERT_SIG else 1
            if avail < need:
                return
            queue.popleft()
            avail -= self._execute(job, now)

    def _spend(self, now: int, units: int) -> None:
        self.budget.consume(now, units)
        self.units_used += units
        second = now // 1000
        self.units_by_second[second] = self.units_by_second.get(second, 0) + units

    def _execute(self, job: _Job, now: int) -> int:
        """Verify one job, spending budget as it goes; returns the units used."""
        sb = job.sb
        if job.kind == _JOB_CERT_SIG:
            cert = sb.certificate
            assert cert is not None
            self._spend(now, 1)
            if not verify_certificate(cert, self.issuer_public_key, now, self.suite):
                job.state = _JOB_FAILED
                job.fail_reason = "bad_certificate"
                self._discard(DISCARD_BAD_CERTIFICATE)
                return 1
            self._spend(now, 1)
            if not self.suite.verify(cert.subject_public_key, sb.signed_payload,
                                     sb.blob.signature):
                job.state = _JOB_FAILED
                job.fail_reason = "bad_signature"
                self._discard(DISCARD_BAD_SIGNATURE)
                return 2
            job.state = _JOB_VERIFIED
            entry = self.neighbors.get(sb.signer_pseudonym_id)
            if entry is not None:
                entry.verified = True
                entry.certificate = cert
                entry.public_key = cert.subject_public_key
            self._deliver(sb, now)
            self._release_pending(sb.signer_pseudonym_id, cert.subject_public_key, now)
            return 2
        self._spend(now, 1)
        if self.suite.verify(job.public_key, sb.signed_payload, sb.blob.signature):
            job.state = _JOB_VERIFIED
            self._deliver(sb, now)
        else:
            job.state = _JOB_FAILED
            job.fail_reason = "bad_signature"
            self._discard(DISCARD_BAD_SIGNATURE)
        return 1

    def _deliver(self, sb: SecuredBeacon, now: int) -> None:
        self.delivered_count += 1
        if self.deliver is not None:
            self.deliver(sb, now)

    def _release_pending(self, pid: bytes, public_key: bytes, now: int) -> None:
        bucket = self._pending.pop(pid, None)
        if not bucket:
            return
        for held in bucket:
            self._enqueue(_Job(_JOB_SIG, held, public_key, now))
