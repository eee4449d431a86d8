"""Secured beacon wire format, omission strategies and budgeted verification."""

from __future__ import annotations

import math
import struct
from random import Random

import pytest

from v2xsec.beaconing import (
    BEACON_BODY_LEN,
    PLAIN_BEACON_LEN,
    SECURED_BEACON_LEN,
    SECURED_BEACON_TYPE,
    SECURED_BEACON_WITH_CERT_LEN,
    Beacon,
    BeaconSecurity,
    BeaconingError,
    MalformedBeaconError,
    NeighborTable,
    NoActivePseudonymError,
    OmissionStrategy,
    ReceiveStatus,
    SecuredBeacon,
    VerificationBudget,
    decide_attach,
)
from v2xsec.clocks import VirtualClock
from v2xsec.hsm import SIGNED_BLOB_LEN, Hsm
from v2xsec.identity import (
    CERT_WIRE_LEN,
    PSEUDONYM_ID_LEN,
    CertificateAuthority,
    IdentityManager,
    PseudonymChangePolicy,
)
from v2xsec.suites import FastHashSuite

from .oracles import attach_trace_reference, budget_available_reference


def _beacon(now=0, heading=0.0, payload=b""):
    return Beacon(x=1.5, y=0.0, velocity=30.0, heading=heading,
                  generation_time=now, payload=payload)


def _vehicle(suite, ca, seed, strategy=None, deliver=None, pool=4, **kwargs):
    clock = VirtualClock(0)
    hsm = Hsm(clock, suite, Random(seed))
    hsm.install_factory_root(ca.public_key)
    manager = IdentityManager(hsm, rng=Random(seed + 1))
    manager.provision(ca, pool, validity_ms=10**10)
    manager.activate_next(0)
    if strategy is None:
        strategy = OmissionStrategy.always()
    return BeaconSecurity(hsm, manager, ca.public_key, strategy,
                          deliver=deliver, suite=suite, **kwargs)


@pytest.fixture
def sender(fast_suite, ca):
    return _vehicle(fast_suite, ca, seed=100)


@pytest.fixture
def receiver(fast_suite, ca):
    delivered = []
    bsec = _vehicle(fast_suite, ca, seed=200,
                    deliver=lambda sb, now: delivered.append((sb, now)))
    bsec.delivered_log = delivered
    return bsec


# -- wire format -----------------------------------------------------------------


def test_wire_length_constants():
    # tag(2) + body(40); body is two doubles, two floats, u64, 8-byte payload
    assert BEACON_BODY_LEN == 8 + 8 + 4 + 4 + 8 + 8 == 40
    assert PLAIN_BEACON_LEN == 2 + BEACON_BODY_LEN == 42
    # tag(2) + pseudonym id(4) + body(40) + signed blob(72) + cert flag(1)
    assert SECURED_BEACON_LEN == 2 + PSEUDONYM_ID_LEN + BEACON_BODY_LEN + SIGNED_BLOB_LEN + 1 == 119
    assert SECURED_BEACON_WITH_CERT_LEN == SECURED_BEACON_LEN + CERT_WIRE_LEN == 261


def test_beacon_pack_roundtrip():
    beacon = _beacon(now=123456, heading=1.25, payload=b"brake")
    packed = beacon.pack()
    assert len(packed) == BEACON_BODY_LEN
    back = Beacon.unpack(packed)
    assert back == beacon
    assert back.payload == b"brake\x00\x00\x00"  # padded to the fixed width


def test_beacon_rejects_bad_sizes():
    with pytest.raises(MalformedBeaconError):
        _beacon(payload=b"123456789")
    with pytest.raises(MalformedBeaconError):
        Beacon.unpack(b"\x00" * 39)


def test_secured_beacon_wire_sizes(sender):
    sb = sender.make_beacon(_beacon(), 0)
    assert sb.certificate is not None
    assert len(sb.to_wire()) == SECURED_BEACON_WITH_CERT_LEN

    sender.strategy = OmissionStrategy.neighbor_triggered()
    sb2 = sender.make_beacon(_beacon(), 100)
    assert sb2.certificate is None
    assert len(sb2.to_wire()) == SECURED_BEACON_LEN


def test_secured_beacon_roundtrip(sender):
    for strategy in (OmissionStrategy.always(), OmissionStrategy.neighbor_triggered()):
        sender.strategy = strategy
        sb = sender.make_beacon(_beacon(), 0)
        back = SecuredBeacon.from_wire(sb.to_wire())
        assert back == sb
        assert back.to_wire() == sb.to_wire()


def test_secured_beacon_parser_is_strict(sender):
    sb = sender.make_beacon(_beacon(), 0)
    wire = sb.to_wire()
    body = wire[2:]

    with pytest.raises(MalformedBeaconError):
        SecuredBeacon.from_wire(struct.pack(">H", 0x0B00) + body)  # wrong tag
    with pytest.raises(MalformedBeaconError):
        SecuredBeacon.from_bytes(body + b"\x00")  # off-size body
    with pytest.raises(MalformedBeaconError):
        SecuredBeacon.from_bytes(body[:-1])

    flag_at = PSEUDONYM_ID_LEN + BEACON_BODY_LEN + SIGNED_BLOB_LEN
    cleared = bytearray(body)
    cleared[flag_at] = 0x00  # flag says no certificate, but one follows
    with pytest.raises(MalformedBeaconError):
        SecuredBeacon.from_bytes(bytes(cleared))

    bad_flag = bytearray(body)
    bad_flag[flag_at] = 0x02
    with pytest.raises(MalformedBeaconError):
        SecuredBeacon.from_bytes(bytes(bad_flag))

    sender.strategy = OmissionStrategy.neighbor_triggered()
    short = sender.make_beacon(_beacon(), 100)
    set_flag = bytearray(short.to_bytes())
    set_flag[flag_at] = 0x01  # flag says certificate, none follows
    with pytest.raises(MalformedBeaconError):
        SecuredBeacon.from_bytes(bytes(set_flag))


# -- omission strategies -----------------------------------------------------------


def test_strategy_validation():
    with pytest.raises(BeaconingError):
        OmissionStrategy.periodic(alpha=0)
    with pytest.raises(BeaconingError):
        OmissionStrategy.neighbor_triggered(beta=-1)


def test_decide_attach_basics():
    always = OmissionStrategy.always()
    periodic = OmissionStrategy.periodic(alpha=3)
    triggered = OmissionStrategy.neighbor_triggered()
    assert decide_attach(always, 5, 0, False)
    assert decide_attach(periodic, 0, 0, False)
    assert not decide_attach(periodic, 1, 0, False)
    assert decide_attach(periodic, 3, 0, False)
    assert not decide_attach(triggered, 0, 0, False)
    assert decide_attach(triggered, 0, 0, True)
    # beta repetition dominates every variant
    assert decide_attach(triggered, 1, 2, False)
    assert decide_attach(periodic, 1, 1, False)


def _strategy_for(variant, alpha, beta):
    if variant == "always":
        return OmissionStrategy.always()
    if variant == "periodic":
        return OmissionStrategy.periodic(alpha=alpha, beta=beta)
    return OmissionStrategy.neighbor_triggered(beta=beta)


def test_attachment_matches_trace_reference(fast_suite, ca):
    """Drive a real sender through random change/neighbor/send traces and
    compare every attach decision with the straight-line replay."""
    rng = Random(0xA77AC4)
    checked = 0
    for trial in range(60):
        variant = rng.choice(["always", "periodic", "neighbor_triggered"])
        alpha = rng.choice([1, 2, 3, 5, 10])
        beta = rng.choice([0, 1, 3])
        events = [rng.choices(["change", "neighbor", "send"], weights=[1, 2, 5])[0]
                  for _ in range(rng.randint(5, 25))]

        sender = _vehicle(fast_suite, ca, seed=1000 + trial,
                          strategy=_strategy_for(variant, alpha, beta))
        got = []
        now = 0
        fake_pid = 0
        for kind in events:
            now += 100
            if kind == "change":
                sender.on_pseudonym_change(None)
            elif kind == "neighbor":
                fake_pid += 1
                sender.neighbors.observe(struct.pack(">I", fake_pid), now, 0.0)
            else:
                sb = sender.make_beacon(_beacon(now), now)
                got.append(sb.certificate is not None)
        expected = attach_trace_reference(variant, alpha, beta,
                                          [(kind,) for kind in events])
        assert got == expected, (trial, variant, alpha, beta, events)
        checked += len(got)
    assert checked >= 300


def test_beta_repetition_after_change(fast_suite, ca):
    sender = _vehicle(fast_suite, ca, seed=50,
                      strategy=OmissionStrategy.neighbor_triggered(beta=3))
    policy = PseudonymChangePolicy(min_lifetime_ms=1, max_lifetime_ms=10**9,
                                   max_beacons=10**9)
    attached = [sender.make_beacon(_beacon(t), t).certificate is not None
                for t in range(0, 500, 100)]
    assert attached == [False] * 5  # no trigger, no certificate

    event = sender.change_if_due(10**9 + 1, policy)
    assert event is not None
    attached = [sender.make_beacon(_beacon(0), 0).certificate is not None
                for _ in range(5)]
    assert attached == [True, True, True, False, False]


# -- neighbor table ------------------------------------------------------------------


def test_neighbor_table_marks_and_expiry():
    table = NeighborTable(expiry_ms=3000)
    assert not table.new_since_mark
    table.observe(b"\x00\x00\x00\x01", 0, 0.0)
    assert table.new_since_mark
    table.mark_beacon_sent()
    table.observe(b"\x00\x00\x00\x01", 100, 0.0)  # refresh, not new
    assert not table.new_since_mark

    assert table.sweep(3100) == []  # silent for exactly expiry_ms: kept
    assert table.sweep(3101) == [b"\x00\x00\x00\x01"]
    assert len(table) == 0

    with pytest.raises(BeaconingError):
        NeighborTable(expiry_ms=0)


def test_neighbor_last_seen_never_regresses():
    table = NeighborTable()
    entry = table.observe(b"\x00\x00\x00\x02", 500, 0.0)
    table.observe(b"\x00\x00\x00\x02", 400, 0.0)
    assert entry.last_seen == 500


# -- verification budget ---------------------------------------------------------------


def test_budget_window_matches_reference():
    rng = Random(0xB0D6E7)
    for trial in range(50):
        cap = rng.randint(1, 60)
        budget = VerificationBudget(cap)
        spends = []
        now = 0
        for _ in range(100):
            now += rng.randint(0, 400)
            expected = budget_available_reference(spends, now, cap)
            assert budget.available(now) == expected, (trial, now, spends)
            if expected > 0 and rng.random() < 0.7:
                units = rng.randint(1, min(3, expected))
                budget.consume(now, units)
                spends.append((now, units))


def test_budget_restores_after_exactly_one_second():
    budget = VerificationBudget(10)
    budget.consume(0, 10)
    assert budget.available(999) == 0
    assert budget.available(1000) == 10

    with pytest.raises(BeaconingError):
        VerificationBudget(0)


# -- receive pipeline ---------------------------------------------------------------


def test_first_contact_with_certificate_delivers(sender, receiver):
    sb = sender.make_beacon(_beacon(), 0)
    result = receiver.on_receive(sb, 10)
    assert result.status is ReceiveStatus.DELIVERED
    assert receiver.delivered_log == [(sb, 10)]
    assert receiver.units_used == 2  # certificate check + signature check
    entry = receiver.neighbors.get(sb.signer_pseudonym_id)
    assert entry.verified and entry.public_key is not None


def test_known_neighbor_costs_one_unit(sender, receiver):
    receiver.on_receive(sender.make_beacon(_beacon(), 0), 0)
    sender.strategy = OmissionStrategy.neighbor_triggered()
    sb = sender.make_beacon(_beacon(100), 100)
    assert sb.certificate is None
    result = receiver.on_receive(sb, 100)
    assert result.status is ReceiveStatus.DELIVERED
    assert receiver.units_used == 3  # 2 for first contact, 1 for the follow-up


def test_certless_first_contact_waits_then_releases(sender, receiver):
    sender.strategy = OmissionStrategy.neighbor_triggered()
    early = [sender.make_beacon(_beacon(t), t) for t in (0, 100)]
    for sb, t in zip(early, (0, 100)):
        result = receiver.on_receive(sb, t)
        assert result.status is ReceiveStatus.PENDING
        assert result.reason == "awaiting_certificate"
    assert receiver.delivered_count == 0  # trust gate holds
    assert receiver.pending_count == 2

    sender.strategy = OmissionStrategy.always()
    with_cert = sender.make_beacon(_beacon(200), 200)
    result = receiver.on_receive(with_cert, 200)
    assert result.status is ReceiveStatus.DELIVERED
    # the held beacons verify right behind the certificate beacon
    assert receiver.pending_count == 0
    assert [sb for sb, _ in receiver.delivered_log] == [with_cert] + early


def test_pending_bucket_is_bounded(sender, fast_suite, ca):
    receiver = _vehicle(fast_suite, ca, seed=300, pending_capacity=2)
    sender.strategy = OmissionStrategy.neighbor_triggered()
    for t in (0, 100, 200):
        receiver.on_receive(sender.make_beacon(_beacon(t), t), t)
    assert receiver.pending_count == 2
    assert receiver.pending_dropped == 1


def test_neighbor_expiry_drops_pending(sender, fast_suite, ca):
    receiver = _vehicle(fast_suite, ca, seed=301, neighbor_expiry_ms=1000)
    sender.strategy = OmissionStrategy.neighbor_triggered()
    receiver.on_receive(sender.make_beacon(_beacon(0), 0), 0)
    assert receiver.pending_count == 1
    assert receiver.neighbor_maintenance(1000) == []  # still within expiry
    expired = receiver.neighbor_maintenance(1001)
    assert len(expired) == 1
    assert receiver.pending_count == 0
    assert receiver.pending_dropped == 1


def test_freshness_window_is_inclusive(sender, receiver):
    for skew, fresh in ((1000, True), (1001, False), (-1000, True), (-1001, False)):
        sb = sender.make_beacon(_beacon(now=5000), 5000)
        result = receiver.on_receive(sb, 5000 + skew)
        expected = ReceiveStatus.DISCARDED if not fresh else None
        if fresh:
            assert result.status is not ReceiveStatus.DISCARDED, skew
        else:
            assert result.status is expected and result.reason == "stale"
    assert receiver.discards.get("stale") == 2


def test_opposite_flow_filter(sender, fast_suite, ca):
    receiver = _vehicle(fast_suite, ca, seed=302, opposite_flow_filter=True)
    receiver.own_heading = 0.0

    oncoming = sender.make_beacon(_beacon(0, heading=math.pi), 0)
    result = receiver.on_receive(oncoming, 0)
    assert result.status is ReceiveStatus.DISCARDED and result.reason == "opposite_flow"

    same_flow = sender.make_beacon(_beacon(100, heading=0.3), 100)
    assert receiver.on_receive(same_flow, 100).status is ReceiveStatus.DELIVERED


def test_bad_signature_is_discarded_not_delivered(sender, receiver):
    # teach the receiver the real key first, then present a mismatched body
    sb = sender.make_beacon(_beacon(), 0)
    receiver.on_receive(sb, 0)
    tampered = Beacon(x=999.0, y=0.0, velocity=30.0, heading=0.0, generation_time=100)
    lying = SecuredBeacon(tampered, sb.signer_pseudonym_id,
                          sender.make_beacon(_beacon(100), 100).blob, None)
    result = receiver.on_receive(lying, 100)
    assert result.status is ReceiveStatus.DISCARDED
    assert result.reason == "bad_signature"
    assert receiver.delivered_count == 1


def test_bad_certificate_is_discarded(sender, receiver, fast_suite):
    sb = sender.make_beacon(_beacon(), 0)
    # certificate from an issuer the receiver does not trust
    rogue_ca = CertificateAuthority(9, suite=fast_suite, rng=Random(999))
    rogue_cert = rogue_ca.issue(sb.certificate.subject_public_key, 0, 10**10)
    rogue = SecuredBeacon(sb.beacon, sb.signer_pseudonym_id, sb.blob, rogue_cert,
                          beacon_bytes=sb.beacon_bytes)
    result = receiver.on_receive(rogue, 0)
    assert result.status is ReceiveStatus.DISCARDED
    assert result.reason == "bad_certificate"
    assert receiver.units_used == 1  # failed cert check never spends the second unit
    assert receiver.delivered_count == 0


def test_budget_exhaustion_queues_then_verifies(sender, fast_suite, ca):
    receiver = _vehicle(fast_suite, ca, seed=303, budget_per_second=2)
    first = sender.make_beacon(_beacon(0), 0)
    assert receiver.on_receive(first, 0).status is ReceiveStatus.DELIVERED  # spends 2

    sender.strategy = OmissionStrategy.neighbor_triggered()
    second = sender.make_beacon(_beacon(100), 100)
    result = receiver.on_receive(second, 100)
    assert result.status is ReceiveStatus.PENDING and result.reason == "queued"
    assert receiver.queue_depth == 1
    assert receiver.delivered_count == 1

    receiver.verification_step(999)  # budget still exhausted
    assert receiver.queue_depth == 1
    receiver.verification_step(1000)  # window slides, budget restored
    assert receiver.queue_depth == 0
    assert receiver.delivered_count == 2


def test_queue_eviction_drops_oldest(sender, fast_suite, ca):
    log = []
    receiver = _vehicle(fast_suite, ca, seed=304, budget_per_second=2,
                        queue_capacity=2,
                        deliver=lambda sb, now: log.append((sb, now)))
    receiver.on_receive(sender.make_beacon(_beacon(0), 0), 0)  # exhausts budget
    sender.strategy = OmissionStrategy.neighbor_triggered()
    beacons = [sender.make_beacon(_beacon(t), t) for t in (10, 20, 30)]
    for sb, t in zip(beacons, (10, 20, 30)):
        receiver.on_receive(sb, t)
    assert receiver.queue_depth == 2
    assert receiver.evicted_jobs == 1

    receiver.verification_step(1200)
    # the first queued beacon was evicted; the two younger ones delivered
    delivered_times = [sb.beacon.generation_time for sb, _ in log]
    assert delivered_times == [0, 20, 30]


def test_receive_wire_counts_malformed(receiver):
    result = receiver.receive_wire(b"\x0b\x01garbage", 0)
    assert result.status is ReceiveStatus.DISCARDED
    assert result.reason.startswith("malformed")
    assert receiver.beacons_received == 1
    assert sum(v for k, v in receiver.discards.items() if k.startswith("malformed")) == 1


def test_receive_wire_roundtrip(sender, receiver):
    sb = sender.make_beacon(_beacon(), 0)
    assert receiver.receive_wire(sb.to_wire(), 0).status is ReceiveStatus.DELIVERED


def test_make_beacon_requires_active_pseudonym(fast_suite, ca):
    clock = VirtualClock(0)
    hsm = Hsm(clock, fast_suite, Random(5))
    hsm.install_factory_root(ca.public_key)
    manager = IdentityManager(hsm, rng=Random(6))
    manager.provision(ca, 1, validity_ms=10**6)
    bsec = BeaconSecurity(hsm, manager, ca.public_key, OmissionStrategy.always(),
                          suite=fast_suite)
    with pytest.raises(NoActivePseudonymError):
        bsec.make_beacon(_beacon(), 0)


def test_units_by_second_bookkeeping(sender, receiver):
    receiver.on_receive(sender.make_beacon(_beacon(0), 0), 0)
    sender.strategy = OmissionStrategy.neighbor_triggered()
    receiver.on_receive(sender.make_beacon(_beacon(1500), 1500), 1500)
    assert receiver.units_by_second == {0: 2, 1: 1}
    assert receiver.units_used == 3
