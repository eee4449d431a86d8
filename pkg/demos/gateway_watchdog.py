"""In-vehicle gateway: static firewall rules plus a reactive detector.

A media player is allowed to read vehicle speed but nothing else. When a
compromised build starts writing implausible powertrain values, the
intrusion detector flags the events against the declared behavior and
injects a deny rule that outranks every static allow.
"""

from v2xsec.gateway import (
    Action,
    BehaviorSpec,
    Firewall,
    FirewallRule,
    IntrusionDetector,
    InVehicleEvent,
    RangeSpec,
    TransitionSpec,
)


def main():
    firewall = Firewall()
    for rule in [
        FirewallRule("media_player", "signal.speed", Action.ALLOW, priority=20),
        FirewallRule("dashboard", "*", Action.ALLOW, priority=30),
        FirewallRule("diagnostics", "*", Action.DENY, priority=10),
    ]:
        firewall.add_rule(rule)

    spec = BehaviorSpec(signals={
        "signal.speed": RangeSpec(low=0.0, high=70.0),
        "signal.gear": TransitionSpec(allowed={
            "park": frozenset({"park", "reverse", "drive"}),
            "reverse": frozenset({"reverse", "park"}),
            "drive": frozenset({"drive", "park"}),
        }),
    })
    detector = IntrusionDetector(spec)

    print("static table, most specific first:")
    for rule in firewall.rules:
        print(f"  p{rule.priority:<3d} {rule.app_id:14s} {rule.resource_id:14s}"
              f" {rule.action.name}")
    print()

    queries = [("media_player", "signal.speed"), ("media_player", "signal.gear"),
               ("dashboard", "signal.gear"), ("intruder", "signal.speed")]
    print("before the attack (unmatched queries fall to default deny):")
    for app, resource in queries:
        verdict = firewall.check_access(app, resource)
        print(f"  {app:14s} -> {resource:14s} {verdict.name}")
    print()

    print("event stream:")
    events = [
        InVehicleEvent("dashboard", "signal.speed", 21.5, timestamp=1000),
        InVehicleEvent("dashboard", "signal.gear", "drive", timestamp=1200),
        InVehicleEvent("media_player", "signal.speed", 2400.0, timestamp=1500),
        InVehicleEvent("media_player", "signal.gear", "reverse", timestamp=1600),
    ]
    for event in events:
        anomaly = detector.observe(event)
        if anomaly is None:
            print(f"  t={event.timestamp}  {event.source_app}: {event.signal}"
                  f" = {event.value!r}  ok")
            continue
        print(f"  t={event.timestamp}  {event.source_app}: {event.signal}"
              f" = {event.value!r}  ANOMALY {anomaly.kind} ({anomaly.detail})")
        injected = detector.react(anomaly, firewall)
        print(f"           injected deny: {injected.app_id} -> {injected.resource_id}"
              f" at reserved priority {injected.priority}")
    print()

    print("after the reaction:")
    for app, resource in queries:
        verdict = firewall.check_access(app, resource)
        print(f"  {app:14s} -> {resource:14s} {verdict.name}")
    print()
    print(f"anomalies flagged: {detector.anomaly_count};"
          f" injected rules can be cleared once the app is reflashed"
          f" (firewall.clear_injected()).")


if __name__ == "__main__":
    main()
