"""Discrete-event MANET simulator with AODV-style routing, gray-hole
adversaries, and a cooperative probe-based detection mechanism.

The package is built around a deterministic integer-microsecond event
engine (:mod:`grayhole_sim.engine`).  Protocol behaviour lives in
:mod:`grayhole_sim.routing` (honest nodes), :mod:`grayhole_sim.adversary`
(selective droppers), :mod:`grayhole_sim.detection` (probing rounds) and
:mod:`grayhole_sim.alarm` (threshold alarms and the shared faulty list).
Scenario configuration, the runner and the CLI sit on top.
"""

from .engine import Simulator, Trace, RngStreams, LinkModel, SimError
from .scenario import ScenarioConfig, ConfigError
from .metrics import RunMetrics, compute_metrics

__all__ = [
    "Simulator",
    "Trace",
    "RngStreams",
    "LinkModel",
    "SimError",
    "ScenarioConfig",
    "ConfigError",
    "RunMetrics",
    "compute_metrics",
]

__version__ = "0.1.0"
