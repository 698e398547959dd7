"""Scenario assembly and execution.

``run_scenario`` builds the whole world from a config (placement,
roster, flows, timers), runs it to the configured duration and returns
the metrics.  ``sweep`` repeats that over an axis, pairing every
detection-on run with a detection-off twin on the same seed so the cost
and benefit of detection are directly comparable row by row.
"""

from __future__ import annotations

import csv
import io
import os
from typing import Optional

from .adversary import GrayholeBehavior
from .alarm import SignatureScheme
from .detection import Detector
from .engine import LinkModel, Simulator, Trace, to_us
from .metrics import RunMetrics, TraceAnalyzer, mean, sample_std
from .mobility import Walker, stationary_position
from .routing import Node
from .scenario import ConfigError, ScenarioConfig


def build_simulation(cfg: ScenarioConfig, trace: Optional[Trace] = None
                     ) -> Simulator:
    """Instantiate engine, nodes, adversaries, detectors and traffic."""
    cfg.validate()
    link = LinkModel(range_m=cfg.link_range_m,
                     base_loss_prob=cfg.link_base_loss_prob,
                     buffer_capacity=cfg.link_buffer_capacity,
                     per_hop_latency_us=to_us(cfg.link_per_hop_latency_ms / 1e3))
    engine = Simulator(seed=cfg.seed, area_w=cfg.area_w, area_h=cfg.area_h,
                       link=link, trace=trace,
                       mobility_tick_s=cfg.mobility_tick_s)

    ids = list(range(cfg.node_count))
    malicious = _pick_roster(engine, cfg, ids)
    scheme = SignatureScheme(cfg.seed)

    colluders = frozenset(malicious) if cfg.adversary_collude else frozenset()
    badmouth = cfg.adversary_badmouth_target \
        if cfg.adversary_badmouth_target >= 0 else None
    if badmouth is not None and badmouth in malicious:
        raise ConfigError("adversary.badmouth_target must be honest")

    for nid in ids:
        node = Node(engine, nid, cfg, scheme)
        if cfg.fixed_positions is not None:
            pos = cfg.fixed_positions[nid]
            walker = None
            if cfg.mobility_max_speed > 0:
                walker = Walker(engine.rngs.stream(f"mobility.{nid}"),
                                cfg.area_w, cfg.area_h,
                                cfg.mobility_max_speed,
                                cfg.mobility_pause_s, position=pos)
        elif cfg.mobility_max_speed > 0:
            walker = Walker(engine.rngs.stream(f"mobility.{nid}"),
                            cfg.area_w, cfg.area_h, cfg.mobility_max_speed,
                            cfg.mobility_pause_s)
            pos = walker.position
        else:
            walker = None
            pos = stationary_position(engine.rngs.stream(f"mobility.{nid}"),
                                      cfg.area_w, cfg.area_h)
        engine.add_node(node, pos, walker)
        if nid in malicious:
            node.adversary = GrayholeBehavior(node, cfg,
                                              colluders=colluders,
                                              badmouth_target=badmouth)
        elif cfg.detection_enabled:
            node.detector = Detector(node, cfg)

    engine.start_mobility()

    _emit_run_meta(engine, cfg, malicious)
    for node in engine.nodes.values():
        if node.adversary is not None:
            node.adversary.start()
        if node.detector is not None:
            node.detector.start()
    _schedule_flows(engine, cfg, malicious)
    return engine


def _pick_roster(engine: Simulator, cfg: ScenarioConfig, ids) -> frozenset:
    if cfg.adversary_ids:
        return frozenset(cfg.adversary_ids)
    count = cfg.adversary_count
    if count == 0:
        return frozenset()
    rng = engine.rngs.stream("roster")
    return frozenset(rng.sample(ids, count))


def _emit_run_meta(engine: Simulator, cfg: ScenarioConfig,
                   malicious: frozenset) -> None:
    engine.trace.emit(0, "run_meta", None, None, "config", None, {
        "seed": cfg.seed,
        "node_count": cfg.node_count,
        "duration_s": f"{cfg.duration_s:g}",
        "max_speed": f"{cfg.mobility_max_speed:g}",
        "packet_rate": f"{cfg.traffic_packet_rate:g}",
        "flows": cfg.traffic_flows,
        "k": cfg.detection_k,
        "detection": int(cfg.detection_enabled),
        "malicious_count": len(malicious),
    })
    roster = ";".join(map(str, sorted(malicious))) or "-"
    engine.trace.emit(0, "ground_truth", None, None, "roster", None,
                      {"malicious": roster})


def _schedule_flows(engine: Simulator, cfg: ScenarioConfig,
                    malicious: frozenset) -> None:
    honest = [i for i in range(cfg.node_count) if i not in malicious]
    if cfg.traffic_flows == 0:
        return
    if len(honest) < 2:
        raise ConfigError("need at least two honest nodes for traffic")
    rng = engine.rngs.stream("traffic")
    period_us = to_us(1.0 / cfg.traffic_packet_rate)
    for flow_id in range(cfg.traffic_flows):
        src, dst = rng.sample(honest, 2)
        start_us = to_us(1.0) + (flow_id * period_us) // max(cfg.traffic_flows, 1)
        engine.schedule(start_us, _flow_tick, engine, src, dst, flow_id, 0,
                        period_us, cfg.traffic_payload_bytes)


def _flow_tick(engine: Simulator, src: int, dst: int, flow_id: int,
               seq: int, period_us: int, payload: int) -> None:
    engine.nodes[src].originate_data(dst, flow_id, seq, payload)
    engine.schedule_in(period_us, _flow_tick, engine, src, dst, flow_id,
                       seq + 1, period_us, payload)


def run_scenario(cfg: ScenarioConfig,
                 trace_path: Optional[str] = None) -> RunMetrics:
    """Run one scenario to completion and return its metrics."""
    trace = Trace()
    analyzer = TraceAnalyzer()
    trace.add_listener(analyzer.feed)
    sink = None
    if trace_path is not None:
        sink = open(trace_path, "w", encoding="utf-8", newline="\n")
        trace.add_line_sink(sink)
    try:
        engine = build_simulation(cfg, trace)
        engine.run_until(to_us(cfg.duration_s))
    finally:
        if sink is not None:
            sink.close()
    return analyzer.finalize()


def run_scenario_to_string(cfg: ScenarioConfig) -> tuple[RunMetrics, str]:
    """Run with the trace captured in memory (used by determinism checks)."""
    trace = Trace()
    analyzer = TraceAnalyzer()
    trace.add_listener(analyzer.feed)
    buf = io.StringIO()
    trace.add_line_sink(buf)
    engine = build_simulation(cfg, trace)
    engine.run_until(to_us(cfg.duration_s))
    return analyzer.finalize(), buf.getvalue()


# ----------------------------------------------------------------------
# sweeps

SWEEP_AXES = ("mobility", "malicious", "volume")

RAW_COLUMNS = [
    "axis_value", "repeat", "seed", "fpr", "miss_rate", "pdr",
    "overhead_pct", "pdr_baseline", "overhead_baseline_pct", "convicted",
    "truth", "node_count", "malicious_count", "max_speed", "packet_rate",
    "flows", "duration_s", "k", "detection_enabled",
]

SUMMARY_COLUMNS = [
    "axis_value", "runs",
    "fpr_mean", "fpr_std", "miss_rate_mean", "miss_rate_std",
    "pdr_mean", "pdr_std", "overhead_pct_mean", "overhead_pct_std",
    "pdr_baseline_mean", "pdr_baseline_std",
    "overhead_baseline_pct_mean", "overhead_baseline_pct_std",
]

_FORMULA_COMMENT = (
    "# fpr=|honest convicted by honest|/|honest|; "
    "miss_rate=|adversaries never convicted|/|adversaries|; "
    "pdr=flow_delivered/flow_originated; "
    "overhead_pct=100*control_tx/data_tx; "
    "baseline columns rerun the same seed with detection off"
)


def apply_axis(cfg: ScenarioConfig, axis: str, value: float
               ) -> ScenarioConfig:
    """Bind one sweep-axis value to a config copy.

    The malicious axis accepts absolute counts (values >= 1) or
    fractions of the node count (values < 1).
    """
    if axis == "mobility":
        return cfg.replace(mobility_max_speed=float(value))
    if axis == "malicious":
        v = float(value)
        count = int(round(v * cfg.node_count)) if v < 1.0 else int(round(v))
        return cfg.replace(adversary_count=count, adversary_ids=())
    if axis == "volume":
        return cfg.replace(traffic_packet_rate=float(value))
    raise ConfigError(f"unknown sweep axis {axis!r}; "
                      f"expected one of {SWEEP_AXES}")


def run_sweep_point(cfg: ScenarioConfig) -> tuple[RunMetrics, RunMetrics]:
    """(metrics, detection-off baseline metrics) for one config."""
    metrics = run_scenario(cfg)
    if cfg.detection_enabled:
        baseline = run_scenario(cfg.replace(detection_enabled=False))
    else:
        baseline = metrics
    return metrics, baseline


def sweep(cfg: ScenarioConfig, axis: str, values, repeats: int,
          out_dir: str) -> tuple[str, str]:
    """Run the grid, write raw and summary CSVs, return their paths."""
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    os.makedirs(out_dir, exist_ok=True)
    raw_path = os.path.join(out_dir, f"sweep_{axis}.csv")
    summary_path = os.path.join(out_dir, f"sweep_{axis}_summary.csv")

    rows = []
    per_value: dict[float, list[tuple[RunMetrics, RunMetrics]]] = {}
    for value in values:
        bound = apply_axis(cfg, axis, value)
        for repeat in range(repeats):
            seeded = bound.replace(seed=cfg.seed + repeat)
            metrics, baseline = run_sweep_point(seeded)
            per_value.setdefault(value, []).append((metrics, baseline))
            rows.append({
                "axis_value": f"{value:g}",
                "repeat": repeat,
                "seed": seeded.seed,
                "fpr": f"{metrics.fpr:.6f}",
                "miss_rate": f"{metrics.miss_rate:.6f}",
                "pdr": f"{metrics.pdr:.6f}",
                "overhead_pct": f"{metrics.overhead_pct:.6f}",
                "pdr_baseline": f"{baseline.pdr:.6f}",
                "overhead_baseline_pct": f"{baseline.overhead_pct:.6f}",
                "convicted": ";".join(map(str, metrics.convicted)) or "-",
                "truth": ";".join(map(str, metrics.truth)) or "-",
                "node_count": seeded.node_count,
                "malicious_count": len(metrics.truth),
                "max_speed": f"{seeded.mobility_max_speed:g}",
                "packet_rate": f"{seeded.traffic_packet_rate:g}",
                "flows": seeded.traffic_flows,
                "duration_s": f"{seeded.duration_s:g}",
                "k": seeded.detection_k,
                "detection_enabled": int(seeded.detection_enabled),
            })

    with open(raw_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_FORMULA_COMMENT + "\n")
        writer = csv.DictWriter(fh, fieldnames=RAW_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for value in values:
            pairs = per_value[value]
            stats = {}
            for label, pick in (
                    ("fpr", lambda p: p[0].fpr),
                    ("miss_rate", lambda p: p[0].miss_rate),
                    ("pdr", lambda p: p[0].pdr),
                    ("overhead_pct", lambda p: p[0].overhead_pct),
                    ("pdr_baseline", lambda p: p[1].pdr),
                    ("overhead_baseline_pct", lambda p: p[1].overhead_pct)):
                series = [pick(p) for p in pairs]
                stats[f"{label}_mean"] = f"{mean(series):.6f}"
                stats[f"{label}_std"] = f"{sample_std(series):.6f}"
            writer.writerow({"axis_value": f"{value:g}",
                             "runs": len(pairs), **stats})

    return raw_path, summary_path
