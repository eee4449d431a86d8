"""Scenario configuration: INI files with strict validation.

A scenario file groups parameters into sections; every key must be known and
every value must parse. Unknown sections or keys are hard errors, not
warnings, so experiment configs cannot silently drift. The same schema backs
the sweep grid: a grid key addresses a field either by its bare name or as
``section.key``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from typing import Any, Callable

SECURITY_MODES = ("novc", "unsecured", "secured")
STRATEGIES = ("always", "periodic", "neighbor_triggered")
CRYPTO_SUITES = ("fast", "p224")


class ScenarioError(Exception):
    """Configuration rejected; message says which key and why."""


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation run."""

    # [scenario]
    name: str = "unnamed"
    vehicle_count: int = 10
    lane_count: int = 1
    lane_spacing_m: float = 3.5
    initial_headway_m: float = 40.0
    initial_speed_mps: float = 30.0
    beacon_interval_ms: int = 100
    duration_s: float = 60.0
    warmup_s: float = 5.0
    seed: int = 1
    security_mode: str = "secured"
    tx_range_m: float = 300.0
    crypto: str = "fast"
    mobility_tick_ms: int = 100
    record_trace: bool = False
    # [channel]
    base_loss: float = 0.02
    load_coefficient: float = 0.3
    capacity_Bps: float = 750_000.0
    propagation_delay_ms: int = 2
    # [beaconing]
    strategy: str = "neighbor_triggered"
    alpha: int = 10
    beta: int = 3
    freshness_window_ms: int = 1000
    neighbor_expiry_ms: int = 3000
    opposite_flow_filter: bool = False
    # [verification]
    budget_per_second: int = 50
    queue_capacity: int = 64
    pending_capacity: int = 64
    # [pseudonym]
    pool_size: int = 8
    cert_validity_s: float = 86_400.0
    min_lifetime_s: float = 30.0
    max_lifetime_s: float = 60.0
    max_beacons: int = 1_000_000
    # [braking]
    braking_enabled: bool = False
    trigger_time_s: float = 30.0
    lead_decel_mps2: float = 8.0
    brake_decel_mps2: float = 8.0
    reaction_delay_ms: int = 1200
    sight_threshold_m: float = 50.0

    # -- derived views ------------------------------------------------------

    @property
    def duration_ms(self) -> int:
        return round(self.duration_s * 1000)

    @property
    def warmup_ms(self) -> int:
        return round(self.warmup_s * 1000)

    def validate(self) -> None:
        def need(cond: bool, message: str) -> None:
            if not cond:
                raise ScenarioError(message)

        need(self.vehicle_count >= 1, "vehicle_count must be >= 1")
        need(self.lane_count >= 1, "lane_count must be >= 1")
        need(self.initial_headway_m > 0, "initial_headway_m must be positive")
        need(self.initial_speed_mps >= 0, "initial_speed_mps must be nonnegative")
        need(self.beacon_interval_ms >= 10, "beacon_interval_ms must be >= 10")
        need(self.duration_s > 0, "duration_s must be positive")
        need(0 <= self.warmup_s < self.duration_s, "warmup_s must lie inside the run")
        need(self.security_mode in SECURITY_MODES,
             f"security_mode must be one of {SECURITY_MODES}")
        need(self.strategy in STRATEGIES, f"strategy must be one of {STRATEGIES}")
        need(self.crypto in CRYPTO_SUITES, f"crypto must be one of {CRYPTO_SUITES}")
        need(self.tx_range_m > 0, "tx_range_m must be positive")
        need(self.mobility_tick_ms >= 1, "mobility_tick_ms must be >= 1")
        need(1000 % self.mobility_tick_ms == 0, "mobility_tick_ms must divide 1000")
        need(0.0 <= self.base_loss <= 1.0, "base_loss must be a probability")
        need(self.load_coefficient >= 0, "load_coefficient must be nonnegative")
        need(self.capacity_Bps > 0, "capacity_Bps must be positive")
        need(self.propagation_delay_ms >= 0, "propagation_delay_ms must be nonnegative")
        need(self.alpha >= 1, "alpha must be >= 1")
        need(self.beta >= 0, "beta must be >= 0")
        need(self.freshness_window_ms > 0, "freshness_window_ms must be positive")
        need(self.neighbor_expiry_ms > 0, "neighbor_expiry_ms must be positive")
        need(self.budget_per_second >= 1, "budget_per_second must be >= 1")
        need(self.queue_capacity >= 1, "queue_capacity must be >= 1")
        need(self.pending_capacity >= 1, "pending_capacity must be >= 1")
        need(self.pool_size >= 1, "pool_size must be >= 1")
        need(self.cert_validity_s > 0, "cert_validity_s must be positive")
        need(0 <= self.min_lifetime_s <= self.max_lifetime_s,
             "pseudonym lifetimes must satisfy 0 <= min <= max")
        need(self.max_beacons >= 1, "max_beacons must be >= 1")
        need(self.trigger_time_s >= 0, "trigger_time_s must be nonnegative")
        need(self.lead_decel_mps2 > 0, "lead_decel_mps2 must be positive")
        need(self.brake_decel_mps2 > 0, "brake_decel_mps2 must be positive")
        need(self.reaction_delay_ms >= 0, "reaction_delay_ms must be nonnegative")
        need(self.sight_threshold_m > 0, "sight_threshold_m must be positive")


# Maps INI (section, key) to (dataclass field, parser). The INI keys match the
# field names except where a section prefix would repeat (braking.enabled).
_SCHEMA: dict[str, dict[str, tuple[str, Callable[[str], Any]]]] = {
    "scenario": {
        "name": ("name", str),
        "vehicle_count": ("vehicle_count", int),
        "lane_count": ("lane_count", int),
        "lane_spacing_m": ("lane_spacing_m", float),
        "initial_headway_m": ("initial_headway_m", float),
        "initial_speed_mps": ("initial_speed_mps", float),
        "beacon_interval_ms": ("beacon_interval_ms", int),
        "duration_s": ("duration_s", float),
        "warmup_s": ("warmup_s", float),
        "seed": ("seed", int),
        "security_mode": ("security_mode", str),
        "tx_range_m": ("tx_range_m", float),
        "crypto": ("crypto", str),
        "mobility_tick_ms": ("mobility_tick_ms", int),
        "record_trace": ("record_trace", _parse_bool),
    },
    "channel": {
        "base_loss": ("base_loss", float),
        "load_coefficient": ("load_coefficient", float),
        "capacity_Bps": ("capacity_Bps", float),
        "propagation_delay_ms": ("propagation_delay_ms", int),
    },
    "beaconing": {
        "strategy": ("strategy", str),
        "alpha": ("alpha", int),
        "beta": ("beta", int),
        "freshness_window_ms": ("freshness_window_ms", int),
        "neighbor_expiry_ms": ("neighbor_expiry_ms", int),
        "opposite_flow_filter": ("opposite_flow_filter", _parse_bool),
    },
    "verification": {
        "budget_per_second": ("budget_per_second", int),
        "queue_capacity": ("queue_capacity", int),
        "pending_capacity": ("pending_capacity", int),
    },
    "pseudonym": {
        "pool_size": ("pool_size", int),
        "cert_validity_s": ("cert_validity_s", float),
        "min_lifetime_s": ("min_lifetime_s", float),
        "max_lifetime_s": ("max_lifetime_s", float),
        "max_beacons": ("max_beacons", int),
    },
    "braking": {
        "enabled": ("braking_enabled", _parse_bool),
        "trigger_time_s": ("trigger_time_s", float),
        "lead_decel_mps2": ("lead_decel_mps2", float),
        "brake_decel_mps2": ("brake_decel_mps2", float),
        "reaction_delay_ms": ("reaction_delay_ms", int),
        "sight_threshold_m": ("sight_threshold_m", float),
    },
}

# Flat lookup for grid overrides: bare key and section.key both work.
_FLAT: dict[str, tuple[str, Callable[[str], Any]]] = {}
for _section, _keys in _SCHEMA.items():
    for _key, (_attr, _parser) in _keys.items():
        _FLAT[f"{_section}.{_key}"] = (_attr, _parser)
        # every bare key in the schema is unique except braking's "enabled"
        if _key not in _FLAT:
            _FLAT[_key] = (_attr, _parser)


def load_scenario(path: str) -> ScenarioConfig:
    """Parse and validate a scenario file. Any problem raises ScenarioError."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    if not read:
        raise ScenarioError(f"cannot read scenario file {path!r}")
    values: dict[str, Any] = {}
    for section in parser.sections():
        schema = _SCHEMA.get(section)
        if schema is None:
            raise ScenarioError(
                f"{path}: unknown section [{section}] (known: {sorted(_SCHEMA)})"
            )
        for key, raw in parser.items(section):
            entry = schema.get(key)
            if entry is None:
                raise ScenarioError(
                    f"{path}: unknown key {key!r} in [{section}] (known: {sorted(schema)})"
                )
            attr, value_parser = entry
            try:
                values[attr] = value_parser(raw)
            except ValueError as exc:
                raise ScenarioError(f"{path}: [{section}] {key} = {raw!r}: {exc}") from exc
    config = ScenarioConfig(**values)
    config.validate()
    return config


def apply_override(config: ScenarioConfig, key: str, raw: str) -> ScenarioConfig:
    """Return a copy of ``config`` with one field replaced from text."""
    entry = _FLAT.get(key)
    if entry is None:
        raise ScenarioError(f"unknown scenario parameter {key!r}")
    attr, value_parser = entry
    try:
        value = value_parser(raw)
    except ValueError as exc:
        raise ScenarioError(f"{key} = {raw!r}: {exc}") from exc
    updated = replace(config, **{attr: value})
    updated.validate()
    return updated
