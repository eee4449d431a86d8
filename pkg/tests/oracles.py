"""Independent reference implementations used as test oracles.

Everything here is deliberately written straight-line, without reusing the
package's own dispatch/decision code, so a bug in the implementation cannot
hide inside its oracle.
"""

from __future__ import annotations

from dataclasses import dataclass


# -- hook dispatch reference ---------------------------------------------------------

DROPPED = object()


def dispatch_reference(handlers, message, direction, max_reinserts=4):
    """Flat re-statement of the chain semantics for one interception point.

    ``handlers`` is a list of (priority, seq, matcher, fn) in registration
    order. Returns the surviving message, or DROPPED.

    Rules restated from scratch: sort by (priority, seq); run each matching
    handler in order; "pass" keeps the current message, "modified" replaces it
    and continues, "drop" ends everything, "reinsert" starts the chain over
    (re-matching against the possibly replaced message) and is allowed at most
    ``max_reinserts`` times per dispatch, after which the message is dropped.
    A handler that raises drops the message.
    """
    ordered = sorted(handlers, key=lambda h: (h[0], h[1]))
    current = message
    reinserts = 0
    while True:
        restarted = False
        for _, _, matcher, fn in ordered:
            if not matcher(current, direction):
                continue
            try:
                verdict, replacement = fn(current, direction)
            except Exception:
                return DROPPED
            if verdict == "pass":
                continue
            if verdict == "modified":
                current = replacement
                continue
            if verdict == "drop":
                return DROPPED
            if verdict == "reinsert":
                reinserts += 1
                if reinserts > max_reinserts:
                    return DROPPED
                if replacement is not None:
                    current = replacement
                restarted = True
                break
            raise AssertionError(f"oracle got unknown verdict {verdict!r}")
        if not restarted:
            return current


# -- gateway access reference ---------------------------------------------------------


def access_reference(rules, source, destination, service):
    """First match in (priority, insertion order) wins; no match denies.

    ``rules`` is the list of (priority, seq, src, dst, service, allow) with
    "*" wildcards, in any order.
    """
    for _, _, r_src, r_dst, r_svc, allow in sorted(rules, key=lambda r: (r[0], r[1])):
        if r_src in ("*", source) and r_dst in ("*", destination) and r_svc in ("*", service):
            return allow
    return False


# -- certificate attachment reference --------------------------------------------------


def attach_trace_reference(variant, alpha, beta, events):
    """Replays a scripted beacon/change/neighbor trace and returns the
    expected attach decision for every sent beacon.

    ``events`` is a sequence of ("change",), ("neighbor",) and ("send",)
    tuples. State rebuilt from scratch: a running count of beacons sent, a
    beta countdown armed by every pseudonym change, and a flag set by any new
    neighbor since the last own send.
    """
    sent = 0
    beta_left = 0
    fresh_neighbor = False
    out = []
    for event in events:
        kind = event[0]
        if kind == "change":
            beta_left = beta
        elif kind == "neighbor":
            fresh_neighbor = True
        elif kind == "send":
            if beta_left > 0:
                attach = True
            elif variant == "always":
                attach = True
            elif variant == "periodic":
                attach = sent % alpha == 0
            else:
                attach = fresh_neighbor
            out.append(attach)
            sent += 1
            if beta_left > 0:
                beta_left -= 1
            fresh_neighbor = False
        else:
            raise AssertionError(f"oracle got unknown event {kind!r}")
    return out


# -- braking kinematics reference -------------------------------------------------------


@dataclass
class VehicleState:
    x: float
    v: float
    a: float


def crash_times_reference(vehicles, duration_s, dt=1e-4):
    """Brute-force integrator: step every vehicle at ``dt`` and report the
    first gap closure per adjacent pair as (follower_index, time_s).

    ``vehicles`` is a front-to-back list of dicts with initial x/v and a
    braking schedule ``(start_time_s, decel)`` or None. Crashed pairs freeze
    at the leader's position. This is O(duration/dt) and independent of the
    engine's closed-form root solving; agreement within a few ms validates
    the analytic path.
    """
    states = [VehicleState(v["x"], v["v"], 0.0) for v in vehicles]
    schedules = [v.get("brake") for v in vehicles]
    frozen = [False] * len(states)
    crashes = []
    crashed_pairs = set()
    steps = int(round(duration_s / dt))
    for step in range(steps):
        t = step * dt
        for i, sched in enumerate(schedules):
            if sched is not None and not frozen[i] and t >= sched[0]:
                states[i].a = -sched[1]
        for s, done in zip(states, frozen):
            if done:
                continue
            if s.v > 0:
                s.v = max(0.0, s.v + s.a * dt)
                s.x += s.v * dt  # semi-implicit Euler, stable for braking
        for i in range(1, len(states)):
            if (i - 1, i) in crashed_pairs:
                continue
            if states[i].x >= states[i - 1].x:
                crashed_pairs.add((i - 1, i))
                crashes.append((i, t))
                states[i].x = states[i - 1].x
                for j in (i - 1, i):
                    states[j].v = 0.0
                    states[j].a = 0.0
                    frozen[j] = True
    return crashes


# -- budget window reference -------------------------------------------------------------


def budget_available_reference(spends, now, max_per_second):
    """Units available at ``now`` given past (time, units) spends.

    A spend at time t counts against every instant in [t, t + 1000); i.e. it
    is restored exactly 1000 ms later.
    """
    in_window = sum(units for t, units in spends if t > now - 1000)
    return max_per_second - in_window


def pkcs7_ecies_length(plaintext_len, point_len=57, iv_len=16, tag_len=20, block=16):
    """Envelope size: ephemeral point, IV, padded CBC body, MAC tag.

    PKCS#7 always pads, so the body is the next multiple of the block size
    strictly greater than the plaintext length.
    """
    body = (plaintext_len // block + 1) * block
    return point_len + iv_len + body + tag_len
