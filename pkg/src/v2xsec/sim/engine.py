"""Discrete-event highway simulation of the secured beaconing stack.

A single carriageway of platooning vehicles beacons at a fixed interval under
one of three modes: no vehicular communication at all, unsecured beacons, or
the full secured stack (HSM, pseudonyms, certificate omission, budgeted
verification) wired through the hook framework exactly as a real node would
be.

Determinism: one virtual clock drives every component; all randomness comes
from named streams derived from the scenario seed; the event queue orders
ties by (event kind, vehicle id, insertion sequence). Two runs of the same
scenario and seed produce identical metrics.

Mobility is piecewise constant-acceleration. Crashes are resolved exactly:
within each advance segment the earliest gap crossing is computed
analytically (quadratic roots, including stop clamping), the world is rolled
to that instant, the colliding pair is frozen, and the remainder of the
segment continues. Crash detection therefore does not depend on the tick
size.

The no-communication mode uses a sight model: drivers only react to a
visible hazard ahead in their lane (the scripted emergency braker, a crashed
vehicle, or a fully stopped vehicle) within the sight threshold. Ordinary
braking of the car in front is not independently visible; that information
arrives, if at all, over the beacon channel. All modes keep the sight
fallback, and any vehicle that starts emergency braking sets a sticky flag
byte in its own beacons so warnings relay down the platoon.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from random import Random

import numpy as np

from ..beaconing import (
    EMERGENCY_BRAKE_FLAG,
    Beacon,
    BeaconSecurity,
    OmissionStrategy,
    OmissionVariant,
    PLAIN_BEACON_TYPE,
    SECURED_BEACON_TYPE,
    SecuredBeacon,
)
from ..clocks import VirtualClock
from ..hooks import (
    Direction,
    Disposition,
    HandlerRegistration,
    HookStack,
    IlpPosition,
    Message,
    RawEthernetAdapter,
    SetLinkAddress,
)
from ..hsm import Hsm
from ..identity import CertificateAuthority, IdentityManager, PseudonymChangePolicy
from ..suites import get_suite
from .metrics import CrashEvent, EmissionRecord, RunMetrics
from .scenario import ScenarioConfig

# Event kinds in tie-break order: mobility first, then braking state changes,
# then emissions, deliveries, and finally verification work at the same time.
_K_TICK = 0
_K_BRAKE_TRIGGER = 1
_K_BRAKE_START = 2
_K_EMIT = 3
_K_DELIVER = 4
_K_VERIFY = 5

_VERIFY_TICK_MS = 100


def stream_rng(seed: int, stream: str) -> Random:
    """Named deterministic substream of the scenario seed."""
    digest = hashlib.sha256(f"{seed}:{stream}".encode()).digest()
    return Random(int.from_bytes(digest[:8], "big"))


def _strategy_from_config(config: ScenarioConfig) -> OmissionStrategy:
    variant = OmissionVariant(config.strategy)
    return OmissionStrategy(variant, alpha=config.alpha, beta=config.beta)


class _Node:
    """Per-vehicle protocol state for the communicating modes."""

    __slots__ = ("stack", "bsec", "identity", "first_heard", "trusted", "rx")

    def __init__(self) -> None:
        self.stack: HookStack | None = None
        self.bsec: BeaconSecurity | None = None
        self.identity: IdentityManager | None = None
        self.first_heard: dict[bytes, int] = {}
        self.trusted: set[bytes] = set()
        self.rx = None  # bound fast-path receive callable


class HighwaySimulation:
    def __init__(self, config: ScenarioConfig, rx_through_stack: bool = False) -> None:
        config.validate()
        self.config = config
        # Receptions normally call the security layer directly; the hook-stack
        # path is behaviorally identical (one registered handler that consumes
        # the message) and stays available for equivalence checks.
        self.rx_through_stack = rx_through_stack
        self.clock = VirtualClock(0)
        self.now = 0
        self.suite = get_suite(config.crypto)
        self.metrics = RunMetrics(
            scenario_id=config.name,
            seed=config.seed,
            security_mode=config.security_mode,
            strategy=config.strategy,
            alpha=config.alpha,
            beta=config.beta,
            beacon_interval_ms=config.beacon_interval_ms,
            vehicle_count=config.vehicle_count,
            duration_s=config.duration_s,
            warmup_ms=config.warmup_ms,
        )
        if config.record_trace:
            self.metrics.trace = []

        n = config.vehicle_count
        self.n = n
        lane_count = config.lane_count
        self.lane = np.arange(n) % lane_count
        pos_in_lane = np.arange(n) // lane_count
        self.x = -pos_in_lane.astype(np.float64) * config.initial_headway_m
        self.y = self.lane.astype(np.float64) * config.lane_spacing_m
        self.v = np.full(n, config.initial_speed_mps, dtype=np.float64)
        self.a = np.zeros(n, dtype=np.float64)
        self.kin_time = 0.0  # float ms so crash instants commit exactly

        self.crashed = [False] * n
        self.emergency = [False] * n  # sticky: beacons carry the brake flag
        self.origin = [False] * n  # scripted emergency brakers
        self.warned = [False] * n
        self.braking = [False] * n

        # lane adjacency: ordered front to back per lane
        self.lane_order: list[list[int]] = []
        for lane_id in range(lane_count):
            vids = [i for i in range(n) if self.lane[i] == lane_id]
            vids.sort(key=lambda i: -self.x[i])
            self.lane_order.append(vids)
        self.pairs: list[tuple[int, int]] = []  # (follower, leader)
        for vids in self.lane_order:
            for k in range(1, len(vids)):
                self.pairs.append((vids[k], vids[k - 1]))
        self.pair_done = [False] * len(self.pairs)

        # channel state (hot-loop tables are plain lists: scalar indexing of
        # numpy arrays is an order of magnitude slower per lookup)
        self.loss_p = [config.base_loss] * n
        self.tx_bytes_window = [0.0] * n
        self.channel_rng = stream_rng(config.seed, "channel")
        self.in_range: list[list[int]] = [[] for _ in range(n)]
        self.range_matrix = np.zeros((n, n), dtype=bool)
        self.total_tx_bytes = 0
        self._radio_stale = True
        self._was_moving = True

        # event queue
        self._heap: list[tuple[int, int, int, int, object]] = []
        self._seq = 0

        self.nodes: list[_Node] = []
        self._security_layers: list[BeaconSecurity] = []
        if config.security_mode == "secured":
            self._build_secured_nodes()
        elif config.security_mode == "unsecured":
            self._build_unsecured_nodes()

        self._schedule_initial_events()

    # -- construction ----------------------------------------------------------

    def _link_address(self, vid: int) -> bytes:
        return bytes([0x02, 0x00, 0x00, 0x00, (vid >> 8) & 0xFF, vid & 0xFF])

    def _build_unsecured_nodes(self) -> None:
        for vid in range(self.n):
            node = _Node()
            node.stack = HookStack(RawEthernetAdapter(self._link_address(vid)))
            self.nodes.append(node)

    def _build_secured_nodes(self) -> None:
        config = self.config
        ca = CertificateAuthority(1, suite=self.suite, rng=stream_rng(config.seed, "ca"))
        self.ca = ca
        strategy = _strategy_from_config(config)
        self.change_policy = PseudonymChangePolicy(
            min_lifetime_ms=round(config.min_lifetime_s * 1000),
            max_lifetime_ms=round(config.max_lifetime_s * 1000),
            max_beacons=config.max_beacons,
        )
        validity_ms = round(config.cert_validity_s * 1000)
        for vid in range(self.n):
            node = _Node()
            rng = stream_rng(config.seed, f"vehicle:{vid}")
            hsm = Hsm(clock=self.clock, suite=self.suite, rng=rng)
            hsm.install_factory_root(ca.public_key)
            identity = IdentityManager(hsm, rng=rng)
            identity.provision(ca, config.pool_size, validity_ms)
            bsec = BeaconSecurity(
                hsm,
                identity,
                ca.public_key,
                strategy,
                deliver=self._make_deliver(vid),
                neighbor_expiry_ms=config.neighbor_expiry_ms,
                budget_per_second=config.budget_per_second,
                queue_capacity=config.queue_capacity,
                pending_capacity=config.pending_capacity,
                freshness_window_ms=config.freshness_window_ms,
                opposite_flow_filter=config.opposite_flow_filter,
                suite=self.suite,
            )
            stack = HookStack(RawEthernetAdapter(self._link_address(vid)))
            stack.register_handler(
                IlpPosition.ABOVE_MAC,
                HandlerRegistration(
                    handler_id="beacon-security",
                    priority=10,
                    message_types=frozenset({SECURED_BEACON_TYPE}),
                    directions=frozenset({Direction.UP}),
                ),
                self._make_receive_handler(vid),
            )
            node.stack = stack
            node.bsec = bsec
            node.identity = identity
            node.rx = bsec.on_receive
            self.nodes.append(node)
            event = identity.activate_next(0, self.change_policy)
            bsec.on_pseudonym_change(event)
            stack.command(SetLinkAddress(event.new_link_address))
        self._security_layers = [n.bsec for n in self.nodes if n.bsec is not None]

    def _make_receive_handler(self, vid: int):
        def handler(message: Message, direction: Direction) -> Disposition:
            sb = message.parsed
            if sb is None:
                sb = SecuredBeacon.from_bytes(message.body)
            bsec = self.nodes[vid].bsec
            assert bsec is not None
            bsec.on_receive(sb, self.now)
            # Trust-gated path: the application only sees verified beacons,
            # delivered through the callback, never via stack passthrough.
            return Disposition.drop()

        return handler

    def _make_deliver(self, vid: int):
        def deliver(sb: SecuredBeacon, now: int) -> None:
            node = self.nodes[vid]
            pid = sb.signer_pseudonym_id
            if pid not in node.trusted:
                node.trusted.add(pid)
                heard = node.first_heard.get(pid)
                if heard is not None:
                    self.metrics.time_to_trust_ms.append(now - heard)
            self._app_on_beacon(vid, sb.beacon, now)

        return deliver

    def _schedule_initial_events(self) -> None:
        config = self.config
        duration = config.duration_ms
        tick = config.mobility_tick_ms
        for t in range(tick, duration + 1, tick):
            self._push(t, _K_TICK, -1, None)
        if config.security_mode != "novc":
            interval = config.beacon_interval_ms
            for vid in range(self.n):
                phase = (vid * interval) // self.n
                self._push(phase, _K_EMIT, vid, None)
            if config.security_mode == "secured":
                for t in range(_VERIFY_TICK_MS, duration + 1, _VERIFY_TICK_MS):
                    self._push(t, _K_VERIFY, -1, None)
        if config.braking_enabled:
            trigger = round(config.trigger_time_s * 1000)
            if trigger <= duration:
                self._push(trigger, _K_BRAKE_TRIGGER, -1, None)
        self._rebuild_radio()

    # -- event machinery -----------------------------------------------------------

    def _push(self, time_ms: int, kind: int, vid: int, payload: object) -> None:
        heapq.heappush(self._heap, (time_ms, kind, vid, self._seq, payload))
        self._seq += 1

    def run(self) -> RunMetrics:
        config = self.config
        heap = self._heap
        while heap:
            time_ms, kind, vid, _, payload = heapq.heappop(heap)
            self.now = time_ms
            self.clock.set(time_ms)
            if kind == _K_DELIVER:
                self._handle_delivery(payload)
            elif kind == _K_EMIT:
                self._handle_emit(vid, time_ms)
            elif kind == _K_VERIFY:
                self._handle_verify(time_ms)
            elif kind == _K_TICK:
                self._handle_tick(time_ms)
            elif kind == _K_BRAKE_START:
                self._handle_brake_start(vid, time_ms)
            else:
                self._handle_brake_trigger(time_ms)
        self._advance_to(config.duration_ms)
        self._finalize()
        return self.metrics

    # -- handlers ---------------------------------------------------------------

    def _handle_tick(self, now: int) -> None:
        self._advance_to(now)
        if self.config.braking_enabled:
            self._sight_check(now)
        if now % 1000 == 0:
            self._roll_channel_window()
            self._sample_queues()
        # Relative geometry only changes while someone accelerates or moves at
        # a different speed; a steady platoon keeps its radio ranges, so skip
        # the O(n^2) rebuild then. One extra rebuild runs after motion ends
        # (or after a crash) to capture the final positions.
        v = self.v
        moving = bool((v != v[0]).any()) or (
            bool(self.a.any()) and bool((v > 0).any())
        )
        if moving or self._was_moving or self._radio_stale:
            self._rebuild_radio()
            self._radio_stale = False
        self._was_moving = moving

    def _handle_emit(self, vid: int, now: int) -> None:
        if self.crashed[vid]:
            return
        config = self.config
        node = self.nodes[vid]
        payload = bytes([EMERGENCY_BRAKE_FLAG]) if self.emergency[vid] else b""
        beacon = Beacon(
            x=float(self.x[vid]),
            y=float(self.y[vid]),
            velocity=float(self.v[vid]),
            heading=0.0,
            generation_time=now,
            payload=payload,
        )
        if config.security_mode == "secured":
            bsec = node.bsec
            assert bsec is not None and node.identity is not None and node.stack is not None
            event = bsec.change_if_due(now, self.change_policy)
            if event is not None:
                node.stack.command(SetLinkAddress(event.new_link_address))
            sb = bsec.make_beacon(beacon, now)
            message = Message(SECURED_BEACON_TYPE, sb.to_bytes(), parsed=sb)
            frame = node.stack.transmit(message)
            with_cert = sb.certificate is not None
        else:
            assert node.stack is not None
            message = Message(PLAIN_BEACON_TYPE, beacon.pack(), parsed=beacon)
            frame = node.stack.transmit(message)
            with_cert = False
        assert frame is not None
        frame_len = len(frame)
        self.total_tx_bytes += frame_len
        self.tx_bytes_window[vid] += frame_len
        metrics = self.metrics
        metrics.beacons_sent += 1
        if now >= config.warmup_ms:
            metrics.beacons_sent_post_warmup += 1
            if with_cert:
                metrics.certs_post_warmup += 1
        if metrics.trace is not None:
            metrics.trace.append(EmissionRecord(now, vid, with_cert, frame_len))
        receivers = self.in_range[vid]
        if receivers:
            self._push(now + config.propagation_delay_ms, _K_DELIVER, vid,
                       (message, receivers))
        next_t = now + config.beacon_interval_ms
        if next_t < config.duration_ms:
            self._push(next_t, _K_EMIT, vid, None)

    def _handle_delivery(self, payload: object) -> None:
        message, receivers = payload  # type: ignore[misc]
        now = self.now
        metrics = self.metrics
        rng_random = self.channel_rng.random
        loss_p = self.loss_p
        crashed = self.crashed
        nodes = self.nodes
        secured = self.config.security_mode == "secured"
        through_stack = self.rx_through_stack
        losses = 0
        receptions = 0
        for r in receivers:
            if crashed[r]:
                continue
            if rng_random() < loss_p[r]:
                losses += 1
                continue
            receptions += 1
            node = nodes[r]
            if secured:
                sb = message.parsed
                node.first_heard.setdefault(sb.signer_pseudonym_id, now)
                if through_stack:
                    node.stack.traverse(message, Direction.UP)
                else:
                    node.rx(sb, now)
            elif through_stack:
                outcome = node.stack.traverse(message, Direction.UP)
                if outcome.delivered:
                    metrics.delivered += 1
                    self._app_on_beacon(r, outcome.message.parsed, now)
            else:
                # no handlers registered: the stack is transparent by the
                # framework invariant, so deliver straight to the application
                metrics.delivered += 1
                self._app_on_beacon(r, message.parsed, now)
        metrics.channel_losses += losses
        metrics.receptions += receptions

    def _handle_verify(self, now: int) -> None:
        maintain = now % 1000 == 0
        for bsec in self._security_layers:
            bsec.verification_step(now)
            if maintain:
                bsec.neighbor_maintenance(now)

    def _handle_brake_trigger(self, now: int) -> None:
        self._advance_to(now)
        for vids in self.lane_order:
            if not vids:
                continue
            front = vids[0]
            if not self.crashed[front]:
                self.a[front] = -self.config.lead_decel_mps2
                self.emergency[front] = True
                self.origin[front] = True
                self.warned[front] = True
                self.braking[front] = True

    def _handle_brake_start(self, vid: int, now: int) -> None:
        self._advance_to(now)
        if self.crashed[vid] or self.braking[vid]:
            return
        self.a[vid] = -self.config.brake_decel_mps2
        self.braking[vid] = True
        self.emergency[vid] = True

    # -- application logic -----------------------------------------------------------

    def _app_on_beacon(self, vid: int, beacon: Beacon, now: int) -> None:
        if not self.config.braking_enabled:
            return
        if not beacon.payload or not (beacon.payload[0] & EMERGENCY_BRAKE_FLAG):
            return
        # react to emergency braking ahead in the own lane
        if abs(beacon.y - self.y[vid]) > self.config.lane_spacing_m / 2:
            return
        if beacon.x <= self.x[vid]:
            return
        self._warn(vid, now)

    def _warn(self, vid: int, now: int) -> None:
        if self.warned[vid] or self.crashed[vid]:
            return
        self.warned[vid] = True
        self._push(now + self.config.reaction_delay_ms, _K_BRAKE_START, vid, None)

    def _sight_check(self, now: int) -> None:
        sight = self.config.sight_threshold_m
        x = self.x
        v = self.v
        for vids in self.lane_order:
            hazard_x: float | None = None
            for vid in vids:
                if hazard_x is not None and not self.warned[vid] and not self.crashed[vid]:
                    if hazard_x - x[vid] <= sight:
                        self._warn(vid, now)
                if (
                    self.crashed[vid]
                    or (self.emergency[vid] and (self.origin[vid] or v[vid] <= 0.01))
                ):
                    hazard_x = x[vid]

    # -- channel and radio ------------------------------------------------------------

    def _rebuild_radio(self) -> None:
        x = self.x
        y = self.y
        dx = x[:, None] - x[None, :]
        dy = y[:, None] - y[None, :]
        within = (dx * dx + dy * dy) <= self.config.tx_range_m**2
        alive = ~np.asarray(self.crashed, dtype=bool)
        within &= alive[:, None]
        within &= alive[None, :]
        self.range_matrix = within
        in_range = self.in_range
        for vid in range(self.n):
            row = within[vid].copy()
            row[vid] = False
            in_range[vid] = np.nonzero(row)[0].tolist()

    def _roll_channel_window(self) -> None:
        config = self.config
        # own transmissions occupy the medium too, so keep the diagonal
        tx_window = np.asarray(self.tx_bytes_window, dtype=np.float64)
        neighborhood = self.range_matrix.astype(np.float64) @ tx_window
        load = neighborhood / config.capacity_Bps
        loss = np.clip(config.base_loss + config.load_coefficient * load, 0.0, 1.0)
        self.loss_p = loss.tolist()
        self.tx_bytes_window = [0.0] * self.n

    def _sample_queues(self) -> None:
        if self.config.security_mode != "secured":
            return
        depths = [bsec.queue_depth for bsec in self._security_layers]
        if depths:
            self.metrics.queue_depth_by_second.append(
                (float(sum(depths)) / len(depths), max(depths))
            )

    # -- mobility -----------------------------------------------------------------------

    def _advance_to(self, t_ms: int) -> None:
        target = float(t_ms)
        while self.kin_time < target - 1e-9:
            dt = (target - self.kin_time) / 1000.0
            crossed = self._advance_segment(dt)
            if crossed is None:
                self.kin_time = target
            else:
                self.kin_time += crossed * 1000.0

    def _advance_segment(self, dt: float) -> float | None:
        """Advance everyone by up to ``dt`` seconds.

        If a pair collides inside the segment, the world is committed at the
        exact collision instant instead, the pair is frozen there, and the
        seconds consumed are returned so the caller can continue the rest of
        the segment with the updated dynamics.
        """
        x0 = self.x
        v0 = self.v
        a = self.a
        earliest: tuple[float, int] | None = None
        for idx, (f, l) in enumerate(self.pairs):
            if self.pair_done[idx]:
                continue
            tau = _pair_crossing(
                x0[f], v0[f], a[f], x0[l], v0[l], a[l], dt
            )
            if tau is not None and (earliest is None or tau < earliest[0]):
                earliest = (tau, idx)
        if earliest is None:
            self.x, self.v = _kin_step(x0, v0, a, dt)
            return None
        tau, idx = earliest
        self.x, self.v = _kin_step(x0, v0, a, tau)
        f, l = self.pairs[idx]
        self.pair_done[idx] = True
        crash_pos = float(self.x[l])
        self.x[f] = crash_pos
        self.v[f] = 0.0
        self.v[l] = 0.0
        self.a[f] = 0.0
        self.a[l] = 0.0
        self.crashed[f] = True
        self.crashed[l] = True
        self.emergency[f] = True
        self.emergency[l] = True
        self._radio_stale = True
        self.metrics.crash_events.append(
            CrashEvent(time_ms=round(self.kin_time + tau * 1000.0), follower=f, leader=l)
        )
        # progress is guaranteed even for tau == 0 because the pair is done now
        return tau

    # -- finish -------------------------------------------------------------------------

    def _finalize(self) -> None:
        metrics = self.metrics
        metrics.offered_load_Bps = self.total_tx_bytes / self.config.duration_s
        metrics.final_positions = [float(val) for val in self.x]
        metrics.final_speeds = [float(val) for val in self.v]
        for node in self.nodes:
            bsec = node.bsec
            if bsec is None:
                continue
            metrics.delivered += bsec.delivered_count
            metrics.evicted_jobs += bsec.evicted_jobs
            metrics.pending_dropped += bsec.pending_dropped
            metrics.verification_units += bsec.units_used
            metrics.units_by_vehicle_second.append(dict(bsec.units_by_second))
            for reason, count in bsec.discards.items():
                metrics.discards[reason] = metrics.discards.get(reason, 0) + count
        metrics.finalize()


def _kin_step(x: np.ndarray, v: np.ndarray, a: np.ndarray,
              dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Constant-acceleration step with a stop clamp (no reversing)."""
    braking = a < 0
    t_stop = np.full(x.shape, dt)
    if braking.any():
        with np.errstate(divide="ignore", invalid="ignore"):
            stop = np.where(braking & (v > 0), v / np.where(braking, -a, 1.0), 0.0)
        t_stop = np.where(braking, np.minimum(dt, stop), dt)
    x_new = x + v * t_stop + 0.5 * a * t_stop * t_stop
    v_new = np.maximum(v + a * t_stop, 0.0)
    return x_new, v_new


# Gaps within a nanometer of zero count as contact; well below any physical
# scale in the model but above accumulated float rounding at tick boundaries.
_CONTACT_EPS = 1e-9


def _stop_time(v: float, a: float) -> float:
    if a < 0:
        return v / -a if v > 0 else 0.0
    return math.inf


def _state_at(x0: float, v0: float, a0: float, t: float) -> tuple[float, float, float]:
    """Position, speed and effective acceleration after ``t`` seconds."""
    ts = _stop_time(v0, a0)
    te = t if t < ts else ts
    x = x0 + v0 * te + 0.5 * a0 * te * te
    v = v0 + a0 * te
    if v < 0.0:
        v = 0.0
    a_eff = a0 if t < ts else 0.0
    return x, v, a_eff


def _earliest_root(c: float, b: float, q: float, seg: float) -> float | None:
    """Earliest tau in (0, seg] with q*tau^2 + b*tau + c == 0, given c > 0."""
    if q == 0.0:
        if b >= 0.0:
            return None
        tau = -c / b
        return tau if tau <= seg else None
    disc = b * b - 4.0 * q * c
    if disc < 0.0:
        return None
    sq = math.sqrt(disc)
    r1 = (-b - sq) / (2.0 * q)
    r2 = (-b + sq) / (2.0 * q)
    if r1 > r2:
        r1, r2 = r2, r1
    for root in (r1, r2):
        if 1e-12 < root <= seg:
            return root
    return None


def _pair_crossing(xf: float, vf: float, af: float, xl: float, vl: float,
                   al: float, dt: float) -> float | None:
    """Earliest time in [0, dt] at which the follower reaches the leader.

    Piecewise quadratic: each vehicle's deceleration clamps to zero speed at
    its stop time, which splits the segment into intervals of constant
    relative acceleration.
    """
    gap_now = xl - xf
    if gap_now <= _CONTACT_EPS:
        # A crossing exactly on a segment boundary can round to a root just
        # past the segment end and go uncommitted; the pair then starts the
        # next segment already touching (gap within float noise of zero).
        # Resolve it now (tau = 0 is safe: the pair is marked done, so it is
        # never counted twice).
        return 0.0
    # cheap reject: even closing at the worst observed relative speed misses
    vf_max = max(vf, vf + af * dt if af > 0 else vf)
    vl_min = min(vl, max(vl + al * dt, 0.0))
    if gap_now + (vl_min - vf_max) * dt > 0.0:
        return None
    breakpoints = {0.0, dt}
    ts_f = _stop_time(vf, af)
    if 0.0 < ts_f < dt:
        breakpoints.add(ts_f)
    ts_l = _stop_time(vl, al)
    if 0.0 < ts_l < dt:
        breakpoints.add(ts_l)
    ordered = sorted(breakpoints)
    for start, end in zip(ordered, ordered[1:]):
        seg = end - start
        if seg <= 0.0:
            continue
        xf0, vf0, af0 = _state_at(xf, vf, af, start)
        xl0, vl0, al0 = _state_at(xl, vl, al, start)
        gap0 = xl0 - xf0
        if gap0 <= _CONTACT_EPS:
            return start if start > 0.0 else None
        tau = _earliest_root(gap0, vl0 - vf0, 0.5 * (al0 - af0), seg)
        if tau is not None:
            return start + tau
    return None


def run_scenario(config: ScenarioConfig) -> RunMetrics:
    """Build, run and summarize one scenario."""
    return HighwaySimulation(config).run()
