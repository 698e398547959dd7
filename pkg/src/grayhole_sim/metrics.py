"""Run metrics derived from the event trace.

One analyzer serves both consumers: attached as a live trace listener
during a run, or fed parsed lines from a trace file afterwards, so the
CLI metrics command and the runner can never disagree.

Definitions (honest = not in the ground-truth adversary roster):

* fpr            = |honest nodes convicted by honest nodes| / |honest|
* miss_rate      = |adversaries never convicted by any honest node|
                   / |adversaries|          (0 when there are none)
* pdr            = flow packets delivered / flow packets originated
* overhead_pct   = 100 * control hop transmissions / data hop transmissions
                   (everything that is not payload data counts as
                   control: discovery, replies, probes, alarms, list
                   exchanges)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .engine import parse_trace_line

_TRANSMIT_KINDS = frozenset({
    "rreq", "rrep", "data", "probe", "further_probe", "notify",
    "coop_request", "probe_query", "probe_reply", "verdict_notice",
    "alarm", "alarm_direct", "faulty_exchange",
})


@dataclass(slots=True)
class RunMetrics:
    fpr: float
    miss_rate: float
    pdr: float
    overhead_pct: float
    node_count: int
    truth: tuple[int, ...]
    convicted: tuple[int, ...]
    originated: int
    delivered: int
    data_tx: int
    control_tx: int
    first_commit_s: dict = field(default_factory=dict)

    @property
    def honest_count(self) -> int:
        return self.node_count - len(self.truth)

    def as_lines(self) -> list[str]:
        """Stable key=value rendering for stdout and metrics files."""
        return [
            f"fpr={self.fpr:.6f}",
            f"miss_rate={self.miss_rate:.6f}",
            f"pdr={self.pdr:.6f}",
            f"overhead_pct={self.overhead_pct:.6f}",
            f"originated={self.originated}",
            f"delivered={self.delivered}",
            f"data_tx={self.data_tx}",
            f"control_tx={self.control_tx}",
            f"node_count={self.node_count}",
            "truth=" + (";".join(map(str, self.truth)) or "-"),
            "convicted=" + (";".join(map(str, self.convicted)) or "-"),
        ]


class TraceAnalyzer:
    """Incremental metric counters over trace events."""

    __slots__ = ("node_count", "truth", "originated", "delivered",
                 "data_tx", "control_tx", "_convicted", "_first_commit_us")

    def __init__(self) -> None:
        self.node_count: Optional[int] = None
        self.truth: Optional[frozenset] = None
        self.originated = 0
        self.delivered = 0
        self.data_tx = 0
        self.control_tx = 0
        self._convicted: set[int] = set()
        self._first_commit_us: dict[int, int] = {}

    # trace listener signature
    def feed(self, t_us, kind, src, dst, outcome, nbytes, extra) -> None:
        if kind == "data":
            self.data_tx += 1
        elif kind == "flow":
            if outcome == "originated":
                self.originated += 1
            elif outcome == "delivered":
                self.delivered += 1
        elif kind in _TRANSMIT_KINDS:
            self.control_tx += 1
        elif kind == "faulty_commit":
            if self.truth is not None and src not in self.truth:
                self._convicted.add(dst)
                if dst not in self._first_commit_us:
                    self._first_commit_us[dst] = t_us
        elif kind == "ground_truth":
            ids = extra.get("malicious", "") if extra else ""
            self.truth = frozenset(
                int(tok) for tok in str(ids).split(";") if tok not in ("", "-"))
        elif kind == "run_meta":
            if extra and "node_count" in extra:
                self.node_count = int(extra["node_count"])

    def finalize(self) -> RunMetrics:
        if self.node_count is None or self.truth is None:
            raise ValueError("trace lacks run_meta/ground_truth records")
        truth = self.truth
        honest = self.node_count - len(truth)
        false_convictions = self._convicted - truth
        fpr = len(false_convictions) / honest if honest else 0.0
        missed = truth - self._convicted
        miss_rate = len(missed) / len(truth) if truth else 0.0
        pdr = self.delivered / self.originated if self.originated else 1.0
        overhead = 100.0 * self.control_tx / self.data_tx \
            if self.data_tx else 0.0
        return RunMetrics(
            fpr=fpr, miss_rate=miss_rate, pdr=pdr, overhead_pct=overhead,
            node_count=self.node_count, truth=tuple(sorted(truth)),
            convicted=tuple(sorted(self._convicted)),
            originated=self.originated, delivered=self.delivered,
            data_tx=self.data_tx, control_tx=self.control_tx,
            first_commit_s={n: t / 1e6
                            for n, t in sorted(self._first_commit_us.items())})


def compute_metrics(lines: Iterable[str]) -> RunMetrics:
    """Recompute metrics from canonical trace lines."""
    analyzer = TraceAnalyzer()
    for line in lines:
        parsed = parse_trace_line(line)
        if parsed is not None:
            analyzer.feed(*parsed)
    return analyzer.finalize()


def compute_metrics_file(path: str) -> RunMetrics:
    with open(path, "r", encoding="utf-8") as fh:
        return compute_metrics(fh)


# ----------------------------------------------------------------------
# rank statistics used by sweep evaluation


def _average_ranks(values) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and \
                values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for idx in range(i, j + 1):
            ranks[order[idx]] = avg
        i = j + 1
    return ranks


def spearman_rho(xs, ys) -> float:
    """Spearman rank correlation with average ranks for ties.
    A series with no variation correlates with nothing: returns 0.0."""
    if len(xs) != len(ys):
        raise ValueError("series length mismatch")
    n = len(xs)
    if n < 2:
        return 0.0
    rx = _average_ranks(list(xs))
    ry = _average_ranks(list(ys))
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0.0 or vy == 0.0:
        return 0.0
    return cov / math.sqrt(vx * vy)


def mean(values) -> float:
    values = list(values)
    return sum(values) / len(values) if values else 0.0


def sample_std(values) -> float:
    values = list(values)
    n = len(values)
    if n < 2:
        return 0.0
    m = sum(values) / n
    return math.sqrt(sum((v - m) ** 2 for v in values) / (n - 1))
