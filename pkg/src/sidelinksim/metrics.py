"""Run metrics and their on-disk forms.

The CSV layout is versioned and row-ordered so two runs of the same
(scenario, seed) diff byte-for-byte. Counter metrics optionally keep a
bucketed series whose fold must equal the total.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

# fixed emission order: appending here is a schema change
METRIC_ORDER = [
    "slots_run",
    "ssb_sent",
    "ssb_rejected",
    "sync_switches",
    "sync_victims",
    "candidate_positions",
    "candidate_set_ratio",
    "selections",
    "reselections",
    "collision_count",
    "tb_sent",
    "retransmissions",
    "sender_delivered",
    "receiver_delivered",
    "harq_failures",
    "feedback_sent",
    "feedback_spoofed",
    "feedback_candidates_legit",
    "feedback_flagged",
    "feedback_flagged_legit",
    "links_established",
    "link_failures",
    "replay_rejects",
    "duplicate_sessions",
    "security_discards",
    "policy_mismatches",
    "identifier_refreshes",
    "tracking_precision",
    "tracking_recall",
    "tracking_f1",
    "airtime_overhead_bits",
    "attack_frames_sent",
    "incidents",
]

# counters that also keep a per-bucket series
SERIES_METRICS = (
    "collision_count",
    "retransmissions",
    "sender_delivered",
    "receiver_delivered",
    "link_failures",
    "replay_rejects",
)

# gauges may be absent ("na"); counters default to 0
GAUGE_METRICS = (
    "candidate_set_ratio",
    "tracking_precision",
    "tracking_recall",
    "tracking_f1",
)


def _fmt(value) -> str:
    if value is None:
        return "na"
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


@dataclass
class MetricsReport:
    scenario: str
    seed: int
    bucket_slots: int = 100
    totals: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in METRIC_ORDER:
            if name in GAUGE_METRICS:
                self.totals.setdefault(name, None)
            else:
                self.totals.setdefault(name, 0)
        for name in SERIES_METRICS:
            self.series.setdefault(name, [])

    def bump(self, name: str, amount: int = 1, slot: int = 0):
        if name not in self.totals or name in GAUGE_METRICS:
            raise KeyError(f"unknown counter metric {name!r}")
        self.totals[name] += amount
        if name in self.series:
            bucket = slot // self.bucket_slots
            buckets = self.series[name]
            while len(buckets) <= bucket:
                buckets.append(0)
            buckets[bucket] += amount

    def gauge(self, name: str, value: float | None):
        if name not in GAUGE_METRICS:
            raise KeyError(f"unknown gauge metric {name!r}")
        self.totals[name] = value

    def check_fold(self):
        """Series totals must fold to the scalar totals."""
        for name, buckets in self.series.items():
            if sum(buckets) != self.totals[name]:
                raise AssertionError(
                    f"{name}: series folds to {sum(buckets)}, total {self.totals[name]}"
                )

    # -- serialization -----------------------------------------------------

    def to_csv(self) -> str:
        self.check_fold()
        lines = [
            f"schema,sidelinksim-metrics,{SCHEMA_VERSION}",
            f"scenario,{self.scenario}",
            f"seed,{self.seed}",
            f"bucket_slots,{self.bucket_slots}",
            "metric,value",
        ]
        for name in METRIC_ORDER:
            lines.append(f"{name},{_fmt(self.totals[name])}")
        for name in SERIES_METRICS:
            joined = ":".join(_fmt(v) for v in self.series[name])
            lines.append(f"series,{name},{joined}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "MetricsReport":
        lines = [ln for ln in text.splitlines() if ln]
        header = lines[0].split(",")
        if header[:2] != ["schema", "sidelinksim-metrics"]:
            raise ValueError("not a metrics file")
        if int(header[2]) != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {header[2]}")
        scenario = lines[1].split(",", 1)[1]
        seed = int(lines[2].split(",", 1)[1])
        bucket = int(lines[3].split(",", 1)[1])
        report = cls(scenario, seed, bucket)
        for line in lines[5:]:
            parts = line.split(",")
            if parts[0] == "series":
                name, joined = parts[1], parts[2] if len(parts) > 2 else ""
                report.series[name] = [_parse(v) for v in joined.split(":") if v != ""]
            else:
                report.totals[parts[0]] = _parse(parts[1])
        return report


def _parse(token: str):
    if token == "na":
        return None
    try:
        return int(token)
    except ValueError:
        return float(token)


def compare(baseline: MetricsReport, other: MetricsReport) -> dict:
    """Per-metric absolute and relative deltas (other minus baseline)."""
    if set(baseline.totals) != set(other.totals):
        raise ValueError("metric sets differ; reports are not comparable")
    deltas = {}
    for name in METRIC_ORDER:
        a, b = baseline.totals[name], other.totals[name]
        if a is None or b is None:
            deltas[name] = (None, None)
            continue
        abs_delta = b - a
        rel = abs_delta / a if a != 0 else None
        deltas[name] = (abs_delta, rel)
    return deltas


def format_compare(deltas: dict) -> str:
    lines = ["metric,delta,relative"]
    for name in METRIC_ORDER:
        abs_delta, rel = deltas[name]
        lines.append(f"{name},{_fmt(abs_delta)},{_fmt(rel)}")
    return "\n".join(lines) + "\n"


def event_line(event: dict) -> str:
    """One event log line: compact, key-sorted, reproducible."""
    return json.dumps(event, sort_keys=True, separators=(",", ":"))


def write_events(path, events: list[dict]):
    with open(path, "w") as fh:
        for event in events:
            fh.write(event_line(event) + "\n")
