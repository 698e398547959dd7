"""Scenario configuration: defaults, file parsing and validation.

Config files are flat ``key = value`` lines with ``#`` comments.  Keys
are dotted names grouped by subsystem; unknown keys are rejected so a
typo cannot silently fall back to a default.  The defaults describe the
reference workload: 50 nodes on a 2000 x 600 m field for 1500 s, up to
20 m/s, 20 constant-bit-rate flows of 2 packets/s x 512 bytes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional


class ConfigError(Exception):
    """Bad configuration input (unknown key, unparsable or out-of-range
    value, inconsistent combination)."""


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_id_list(raw: str) -> tuple[int, ...]:
    raw = raw.strip()
    if not raw or raw == "none":
        return ()
    return tuple(int(tok) for tok in raw.split(";") if tok != "")


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    # sim.*
    seed: int = 1
    duration_s: float = 1500.0
    area_w: float = 2000.0
    area_h: float = 600.0
    node_count: int = 50
    mobility_tick_s: float = 0.5
    # link.*
    link_range_m: float = 200.0
    link_base_loss_prob: float = 0.01
    link_buffer_capacity: int = 50
    link_per_hop_latency_ms: float = 2.0
    # mobility.*
    mobility_max_speed: float = 20.0
    mobility_pause_s: float = 0.0
    # traffic.*
    traffic_flows: int = 20
    traffic_packet_rate: float = 2.0
    traffic_payload_bytes: int = 512
    # routing.*
    routing_route_lifetime_s: float = 10.0
    routing_pending_capacity: int = 128
    routing_discovery_timeout_s: float = 1.0
    routing_discovery_retries: int = 2
    routing_max_queue_wait_s: float = 60.0
    routing_link_retries: int = 4
    routing_net_ttl: int = 32
    # adversary.*
    adversary_count: int = 0
    adversary_ids: tuple[int, ...] = ()
    adversary_min_drop_rate: float = 0.2
    adversary_max_drop_rate: float = 1.0
    adversary_p_good_to_bad: float = 0.2
    adversary_p_bad_to_good: float = 0.2
    adversary_phase_tick_s: float = 5.0
    adversary_start_phase: str = "random"
    adversary_victims: tuple[int, ...] = ()
    adversary_collude: bool = False
    adversary_badmouth_target: int = -1
    # detection.*
    detection_enabled: bool = True
    detection_k: int = 3
    detection_loss_budget: float = 0.1
    detection_qos_horizon_s: float = 100.0
    detection_min_period_s: float = 5.0
    detection_max_period_s: float = 60.0
    detection_epoch_s: float = 60.0
    detection_rrep_wait_ms: float = 500.0
    detection_probe_grace_ms: float = 100.0
    detection_coop_window_ms: float = 2500.0
    detection_probe_gap_ms: float = 50.0
    detection_flood_ttl: int = 2
    detection_propagation: str = "piggyback"
    detection_alarm_expiry_epochs: int = 3
    # programmatic only: exact node placement {id: (x, y)}
    fixed_positions: Optional[dict] = field(default=None, compare=False)

    # ------------------------------------------------------------------

    def malicious_ids(self) -> tuple[int, ...]:
        """Explicit adversary ids, or () when the roster is drawn."""
        return self.adversary_ids

    def effective_adversary_count(self) -> int:
        return len(self.adversary_ids) if self.adversary_ids \
            else self.adversary_count

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        errs = []
        if self.node_count < 2:
            errs.append("sim.node_count must be >= 2")
        if self.duration_s <= 0:
            errs.append("sim.duration_s must be positive")
        if self.area_w <= 0 or self.area_h <= 0:
            errs.append("sim.area_w and sim.area_h must be positive")
        if self.mobility_tick_s <= 0:
            errs.append("sim.mobility_tick_s must be positive")
        if self.link_range_m <= 0:
            errs.append("link.range_m must be positive")
        if not 0.0 <= self.link_base_loss_prob <= 1.0:
            errs.append("link.base_loss_prob must be in [0, 1]")
        if self.link_per_hop_latency_ms <= 0:
            errs.append("link.per_hop_latency_ms must be positive")
        if self.mobility_max_speed < 0:
            errs.append("mobility.max_speed must be >= 0")
        if self.mobility_pause_s < 0:
            errs.append("mobility.pause_s must be >= 0")
        if self.traffic_flows < 0:
            errs.append("traffic.flows must be >= 0")
        if self.traffic_packet_rate <= 0:
            errs.append("traffic.packet_rate must be positive")
        if self.traffic_payload_bytes <= 0:
            errs.append("traffic.payload_bytes must be positive")
        if self.routing_route_lifetime_s <= 0:
            errs.append("routing.route_lifetime_s must be positive")
        if self.routing_pending_capacity < 0:
            errs.append("routing.pending_capacity must be >= 0 "
                        "(0 = unlimited)")
        if self.routing_max_queue_wait_s <= 0:
            errs.append("routing.max_queue_wait_s must be positive")
        if self.routing_discovery_timeout_s <= 0:
            errs.append("routing.discovery_timeout_s must be positive")
        if self.routing_net_ttl < 1:
            errs.append("routing.net_ttl must be >= 1")
        if self.routing_discovery_retries < 0:
            errs.append("routing.discovery_retries must be >= 0")
        if self.routing_link_retries < 0:
            errs.append("routing.link_retries must be >= 0")
        n_adv = self.effective_adversary_count()
        if n_adv < 0:
            errs.append("adversary.count must be >= 0")
        if n_adv >= self.node_count:
            errs.append("adversaries must be fewer than nodes")
        bad_ids = [i for i in self.adversary_ids
                   if not 0 <= i < self.node_count]
        if bad_ids:
            errs.append(f"adversary.ids out of range: {bad_ids}")
        if len(set(self.adversary_ids)) != len(self.adversary_ids):
            errs.append("adversary.ids contains duplicates")
        if not 0.0 <= self.adversary_min_drop_rate \
                <= self.adversary_max_drop_rate <= 1.0:
            errs.append("adversary drop rates must satisfy "
                        "0 <= min <= max <= 1")
        for name, p in (("adversary.p_good_to_bad", self.adversary_p_good_to_bad),
                        ("adversary.p_bad_to_good", self.adversary_p_bad_to_good)):
            if not 0.0 <= p <= 1.0:
                errs.append(f"{name} must be in [0, 1]")
        if self.adversary_phase_tick_s <= 0:
            errs.append("adversary.phase_tick_s must be positive")
        if self.adversary_start_phase not in ("good", "bad", "random"):
            errs.append("adversary.start_phase must be good, bad or random")
        if self.adversary_badmouth_target >= self.node_count:
            errs.append("adversary.badmouth_target out of range")
        if self.detection_k < 1:
            errs.append("detection.k must be >= 1")
        if not 0.0 < self.detection_loss_budget <= 1.0:
            errs.append("detection.loss_budget must be in (0, 1]")
        if self.detection_qos_horizon_s <= 0:
            errs.append("detection.qos_horizon_s must be positive")
        if not 0 < self.detection_min_period_s <= self.detection_max_period_s:
            errs.append("detection periods must satisfy 0 < min <= max")
        if self.detection_epoch_s <= 0:
            errs.append("detection.epoch_s must be positive")
        for name, v in (("detection.rrep_wait_ms", self.detection_rrep_wait_ms),
                        ("detection.probe_grace_ms", self.detection_probe_grace_ms),
                        ("detection.coop_window_ms", self.detection_coop_window_ms),
                        ("detection.probe_gap_ms", self.detection_probe_gap_ms)):
            if v <= 0:
                errs.append(f"{name} must be positive")
        if self.detection_flood_ttl < 1:
            errs.append("detection.flood_ttl must be >= 1")
        if self.detection_propagation not in ("piggyback", "neighborhood"):
            errs.append("detection.propagation must be piggyback "
                        "or neighborhood")
        if self.detection_alarm_expiry_epochs < 1:
            errs.append("detection.alarm_expiry_epochs must be >= 1")
        if self.fixed_positions is not None:
            if set(self.fixed_positions) != set(range(self.node_count)):
                errs.append("fixed positions must cover every node id")
        if errs:
            raise ConfigError("; ".join(errs))


# dotted key -> (attribute, parser)
_KEYS = {
    "sim.seed": ("seed", int),
    "sim.duration_s": ("duration_s", float),
    "sim.area_w": ("area_w", float),
    "sim.area_h": ("area_h", float),
    "sim.node_count": ("node_count", int),
    "sim.mobility_tick_s": ("mobility_tick_s", float),
    "link.range_m": ("link_range_m", float),
    "link.base_loss_prob": ("link_base_loss_prob", float),
    "link.buffer_capacity": ("link_buffer_capacity", int),
    "link.per_hop_latency_ms": ("link_per_hop_latency_ms", float),
    "mobility.max_speed": ("mobility_max_speed", float),
    "mobility.pause_s": ("mobility_pause_s", float),
    "traffic.flows": ("traffic_flows", int),
    "traffic.packet_rate": ("traffic_packet_rate", float),
    "traffic.payload_bytes": ("traffic_payload_bytes", int),
    "routing.route_lifetime_s": ("routing_route_lifetime_s", float),
    "routing.pending_capacity": ("routing_pending_capacity", int),
    "routing.discovery_timeout_s": ("routing_discovery_timeout_s", float),
    "routing.net_ttl": ("routing_net_ttl", int),
    "routing.discovery_retries": ("routing_discovery_retries", int),
    "routing.max_queue_wait_s": ("routing_max_queue_wait_s", float),
    "routing.link_retries": ("routing_link_retries", int),
    "adversary.count": ("adversary_count", int),
    "adversary.ids": ("adversary_ids", _parse_id_list),
    "adversary.min_drop_rate": ("adversary_min_drop_rate", float),
    "adversary.max_drop_rate": ("adversary_max_drop_rate", float),
    "adversary.p_good_to_bad": ("adversary_p_good_to_bad", float),
    "adversary.p_bad_to_good": ("adversary_p_bad_to_good", float),
    "adversary.phase_tick_s": ("adversary_phase_tick_s", float),
    "adversary.start_phase": ("adversary_start_phase", str),
    "adversary.victims": ("adversary_victims", _parse_id_list),
    "adversary.collude": ("adversary_collude", _parse_bool),
    "adversary.badmouth_target": ("adversary_badmouth_target", int),
    "detection.enabled": ("detection_enabled", _parse_bool),
    "detection.k": ("detection_k", int),
    "detection.loss_budget": ("detection_loss_budget", float),
    "detection.qos_horizon_s": ("detection_qos_horizon_s", float),
    "detection.min_period_s": ("detection_min_period_s", float),
    "detection.max_period_s": ("detection_max_period_s", float),
    "detection.epoch_s": ("detection_epoch_s", float),
    "detection.rrep_wait_ms": ("detection_rrep_wait_ms", float),
    "detection.probe_grace_ms": ("detection_probe_grace_ms", float),
    "detection.coop_window_ms": ("detection_coop_window_ms", float),
    "detection.probe_gap_ms": ("detection_probe_gap_ms", float),
    "detection.flood_ttl": ("detection_flood_ttl", int),
    "detection.propagation": ("detection_propagation", str),
    "detection.alarm_expiry_epochs": ("detection_alarm_expiry_epochs", int),
}


def parse_config_text(text: str, base: Optional[ScenarioConfig] = None
                      ) -> ScenarioConfig:
    cfg = base if base is not None else ScenarioConfig()
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value, "
                              f"got {raw.strip()!r}")
        key = key.strip()
        value = value.strip()
        spec = _KEYS.get(key)
        if spec is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser = spec
        try:
            overrides[attr] = parser(value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: "
                              f"{exc}") from exc
    cfg = cfg.replace(**overrides)
    cfg.validate()
    return cfg


def load_config(path: str, base: Optional[ScenarioConfig] = None
                ) -> ScenarioConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base)
