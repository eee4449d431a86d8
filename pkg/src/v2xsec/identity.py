"""Pseudonymous identities: compact certificates and their lifecycle.

A vehicle holds one long-term identity and a pool of short-term pseudonyms,
each a key pair living in the HSM plus a compact certificate issued by an
authority. Beacons are signed under the active pseudonym; a change policy
decides when to move to the next one, and every change comes with a fresh
random link-layer address so lower layers cannot be used to re-link the old
and new identities.

Certificate wire format (fixed 142 bytes): 1-byte version, 4-byte issuer id,
8+8-byte validity window (big-endian ms), 57-byte uncompressed subject point,
64-byte signature field (DER, zero padded). The signature covers everything
before it.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from enum import Enum
from random import Random

from .hsm import Hsm, KeyRole
from .suites import (
    POINT_LEN,
    SIG_FIELD_LEN,
    P224Suite,
    SignatureSuite,
    SuiteError,
    pad_signature,
    unpad_signature,
)

CERT_VERSION = 1
CERT_TBS_LEN = 1 + 4 + 8 + 8 + POINT_LEN
CERT_WIRE_LEN = CERT_TBS_LEN + SIG_FIELD_LEN
PSEUDONYM_ID_LEN = 4
LINK_ADDR_LEN = 6


class IdentityError(Exception):
    pass


class MalformedCertificateError(IdentityError, ValueError):
    pass


class PoolEmptyError(IdentityError):
    """Raised when a pseudonym change is requested with no provisioned spare."""


@dataclass(frozen=True)
class CompactCertificate:
    """Minimal beacon-sized certificate binding a pseudonym key to an issuer."""

    issuer_id: int
    validity_start: int
    validity_end: int
    subject_public_key: bytes
    signature: bytes

    def tbs_bytes(self) -> bytes:
        return (
            struct.pack(">BIQQ", CERT_VERSION, self.issuer_id,
                        self.validity_start, self.validity_end)
            + self.subject_public_key
        )

    def to_bytes(self) -> bytes:
        return self.tbs_bytes() + pad_signature(self.signature)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompactCertificate":
        if len(data) != CERT_WIRE_LEN:
            raise MalformedCertificateError(
                f"certificate must be {CERT_WIRE_LEN}B, got {len(data)}"
            )
        version, issuer_id, start, end = struct.unpack(">BIQQ", data[:21])
        if version != CERT_VERSION:
            raise MalformedCertificateError(f"unsupported certificate version {version}")
        subject = data[21:21 + POINT_LEN]
        try:
            sig = unpad_signature(data[CERT_TBS_LEN:])
        except SuiteError as exc:
            raise MalformedCertificateError(str(exc)) from exc
        return cls(issuer_id=issuer_id, validity_start=start, validity_end=end,
                   subject_public_key=subject, signature=sig)

    def pseudonym_id(self) -> bytes:
        """Short stable identifier: leading bytes of the certificate hash."""
        return hashlib.sha256(self.to_bytes()).digest()[:PSEUDONYM_ID_LEN]


def verify_certificate(
    cert: CompactCertificate,
    issuer_public_key: bytes,
    now: int,
    suite: SignatureSuite | None = None,
) -> bool:
    """Signature plus validity-window check; malformed input is just False."""
    suite = suite if suite is not None else P224Suite()
    if not (cert.validity_start <= now <= cert.validity_end):
        return False
    if len(cert.subject_public_key) != POINT_LEN:
        return False
    return suite.verify(issuer_public_key, cert.tbs_bytes(), cert.signature)


class CertificateAuthority:
    """Issuing authority for pseudonym certificates (infrastructure side)."""

    def __init__(self, issuer_id: int, suite: SignatureSuite | None = None,
                 rng: Random | None = None) -> None:
        if not 0 <= issuer_id <= 0xFFFFFFFF:
            raise IdentityError("issuer_id must fit in 32 bits")
        self.issuer_id = issuer_id
        self.suite = suite if suite is not None else P224Suite()
        self._private, self.public_key = self.suite.generate_keypair(rng)

    def issue(self, subject_public_key: bytes, validity_start: int,
              validity_end: int) -> CompactCertificate:
        if validity_end < validity_start:
            raise IdentityError("validity window is inverted")
        if len(subject_public_key) != POINT_LEN:
            raise IdentityError("subject key must be a 57-byte uncompressed point")
        tbs = CompactCertificate(
            issuer_id=self.issuer_id,
            validity_start=validity_start,
            validity_end=validity_end,
            subject_public_key=subject_public_key,
            signature=b"",
        )
        sig = self.suite.sign(self._private, tbs.tbs_bytes())
        return CompactCertificate(
            issuer_id=self.issuer_id,
            validity_start=validity_start,
            validity_end=validity_end,
            subject_public_key=subject_public_key,
            signature=sig,
        )


# -- pseudonym lifecycle ---------------------------------------------------------


class PseudonymState(Enum):
    PROVISIONED = "provisioned"
    ACTIVE = "active"
    RETIRED = "retired"


@dataclass
class Pseudonym:
    key_id: str
    certificate: CompactCertificate
    state: PseudonymState = PseudonymState.PROVISIONED
    activated_at: int | None = None
    beacons_signed: int = 0
    # drawn lifetime for this activation; None falls back to the policy max
    lifetime_ms: int | None = None

    @property
    def pseudonym_id(self) -> bytes:
        # The certificate never changes, so hash it once.
        pid = self.__dict__.get("_pid")
        if pid is None:
            pid = self.__dict__["_pid"] = self.certificate.pseudonym_id()
        return pid


@dataclass(frozen=True)
class PseudonymChangePolicy:
    """Bounds on how long one pseudonym may stay in use.

    A change is blocked before ``min_lifetime_ms`` (link-stability floor) and
    forced once age reaches ``max_lifetime_ms`` or the beacon count reaches
    ``max_beacons``.
    """

    min_lifetime_ms: int
    max_lifetime_ms: int
    max_beacons: int

    def __post_init__(self) -> None:
        if self.min_lifetime_ms < 0 or self.max_lifetime_ms < self.min_lifetime_ms:
            raise IdentityError("lifetime bounds must satisfy 0 <= min <= max")
        if self.max_beacons < 1:
            raise IdentityError("max_beacons must be at least 1")


def should_change(now: int, pseudonym: Pseudonym, policy: PseudonymChangePolicy) -> bool:
    """Decide whether the active pseudonym must be replaced at time ``now``."""
    if pseudonym.activated_at is None:
        return False
    age = now - pseudonym.activated_at
    if age < policy.min_lifetime_ms:
        return False
    limit = pseudonym.lifetime_ms
    if limit is None:
        limit = policy.max_lifetime_ms
    return age >= limit or pseudonym.beacons_signed >= policy.max_beacons


@dataclass(frozen=True)
class PseudonymChangeEvent:
    old_pseudonym_id: bytes | None
    new_pseudonym_id: bytes
    new_link_address: bytes


def _random_link_address(rng: Random) -> bytes:
    raw = bytearray(rng.randbytes(LINK_ADDR_LEN))
    raw[0] = (raw[0] | 0x02) & 0xFE  # locally administered, unicast
    return bytes(raw)


class IdentityManager:
    """Holds a vehicle's pseudonym pool and performs atomic changes."""

    def __init__(self, hsm: Hsm, rng: Random | None = None) -> None:
        self.hsm = hsm
        self._rng = rng if rng is not None else Random()
        self._pool: list[Pseudonym] = []
        self._active: Pseudonym | None = None
        self._spares = 0
        self.link_address = _random_link_address(self._rng)
        self.changes_performed = 0

    @property
    def active(self) -> Pseudonym | None:
        return self._active

    @property
    def spare_count(self) -> int:
        return self._spares

    def provision(self, ca: CertificateAuthority, count: int,
                  validity_ms: int) -> list[Pseudonym]:
        """Generate ``count`` short-term keys in the HSM and certify them."""
        now = self.hsm.read_clock()
        fresh: list[Pseudonym] = []
        for _ in range(count):
            key_id, public = self.hsm.generate_key(KeyRole.SHORT_TERM)
            cert = ca.issue(public, now, now + validity_ms)
            fresh.append(Pseudonym(key_id=key_id, certificate=cert))
        self._pool.extend(fresh)
        self._spares += len(fresh)
        return fresh

    def activate_next(self, now: int,
                      policy: PseudonymChangePolicy | None = None) -> PseudonymChangeEvent:
        """Retire the active pseudonym and switch to the next provisioned one.

        The new identity gets a fresh random link address; the two are swapped
        together so no beacon ever pairs an old address with a new pseudonym.
        When a policy is given the fresh pseudonym also draws a random
        lifetime within the policy bounds, so a fleet provisioned at the same
        moment does not change identities in lockstep (synchronized changes
        are trivially linkable).
        """
        candidate = next(
            (p for p in self._pool if p.state is PseudonymState.PROVISIONED), None
        )
        if candidate is None:
            raise PoolEmptyError("no provisioned pseudonym available")
        old_id = None
        if self._active is not None:
            self._active.state = PseudonymState.RETIRED
            old_id = self._active.pseudonym_id
            self.hsm.revoke_key(self._active.key_id)
            self.changes_performed += 1
        candidate.state = PseudonymState.ACTIVE
        candidate.activated_at = now
        candidate.beacons_signed = 0
        if policy is not None:
            candidate.lifetime_ms = self._rng.randint(
                policy.min_lifetime_ms, policy.max_lifetime_ms
            )
        self._spares -= 1
        self._active = candidate
        self.link_address = _random_link_address(self._rng)
        return PseudonymChangeEvent(
            old_pseudonym_id=old_id,
            new_pseudonym_id=candidate.pseudonym_id,
            new_link_address=self.link_address,
        )

    def should_change(self, now: int, policy: PseudonymChangePolicy) -> bool:
        if self._active is None:
            return False
        if not should_change(now, self._active, policy):
            return False
        return self._spares > 0
