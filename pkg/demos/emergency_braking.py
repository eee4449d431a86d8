"""Emergency braking with and without secured beaconing.

A 10-vehicle platoon follows a lead car that slams the brakes mid-run.
Vehicles that receive a trusted warning start braking after a reaction
delay; without communication they react only when the hazard enters a short
sight range. Crash counts are summed over five seeds per mode.
"""

import os

from v2xsec.sim.scenario import apply_override, load_scenario
from v2xsec.sim.sweep import GridSpec, run_sweep

SCENARIOS = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                         "scenarios")
SEEDS = "seed=" + ",".join(str(s) for s in range(1, 6))


def main():
    base = load_scenario(os.path.join(SCENARIOS, "braking.ini"))
    grid = GridSpec.parse([SEEDS])

    print("crashes over 5 seeds (10 vehicles, lead brakes hard at t=30 s)")
    print(f"  {'mode':12s} {'crashes':>8s}   per seed")
    runs_by_mode = {}
    for mode in ("novc", "unsecured", "secured"):
        runs = run_sweep(apply_override(base, "security_mode", mode), grid)
        runs_by_mode[mode] = runs
        per_seed = " ".join(str(m.crashes) for m in runs)
        print(f"  {mode:12s} {sum(m.crashes for m in runs):8d}   [{per_seed}]")

    print()
    print("anatomy of one uncommunicated pileup (novc, seed 1):")
    for event in runs_by_mode["novc"][0].crash_events:
        print(f"  t={event.time_ms / 1000:7.3f}s  vehicle {event.follower}"
              f" hit vehicle {event.leader}")
    secured = runs_by_mode["secured"][0]
    if not secured.crash_events:
        print()
        print("with secured beacons the same platoon stops cleanly: every"
              " first-heard beacon carried its certificate, so trust was"
              f" immediate (p95 {secured.p95_time_to_trust_ms:.0f} ms) and the"
              " warning propagated well inside the 1.2 s reaction delay.")


if __name__ == "__main__":
    main()
