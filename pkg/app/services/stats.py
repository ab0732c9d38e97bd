"""
Per-class delivery statistics over packet records, and the cross-seed summary.

Latency is (deliver - enqueue) slots times the slot duration. Jitter is the
mean absolute difference between consecutive latencies, taken in delivery
order. Percentiles are nearest-rank.
"""
from collections.abc import Iterable, Sequence

import numpy as np

from app.models.record import PacketRecord
from app.models.schedule import FlowClass
from app.schemas.report import SUMMARY_METRICS, FlowStats, MetricSummary, RunReport

CONTROL = "Control"

REPORTED_CLASSES: tuple[str, ...] = (
    FlowClass.APP.value,
    FlowClass.NSU.value,
    FlowClass.FTQ.value,
    FlowClass.SDN_DOWN.value,
    CONTROL,
)


def _class_members(flow_class: FlowClass | str) -> set[str]:
    name = flow_class.value if isinstance(flow_class, FlowClass) else flow_class
    if name == CONTROL:
        return {FlowClass.NSU.value, FlowClass.FTQ.value}
    return {name}


def compute_flow_stats(
    records: Iterable[PacketRecord], flow_class: FlowClass | str, slot_duration_ms: float
) -> FlowStats:
    members = _class_members(flow_class)
    name = flow_class.value if isinstance(flow_class, FlowClass) else flow_class
    selected = [r for r in records if r.flow_class.value in members]
    delivered = sorted((r for r in selected if r.delivered), key=lambda r: (r.deliver_asn, r.packet_id))
    n_sent, n_delivered = len(selected), len(delivered)
    stats = FlowStats(flow_class=name, n_sent=n_sent, n_delivered=n_delivered)
    if n_sent:
        stats.pdr = n_delivered / n_sent
    if not n_delivered:
        return stats
    latencies = np.array([r.latency_slots() for r in delivered], dtype=float) * slot_duration_ms
    stats.latency_mean_ms = float(latencies.mean())
    stats.latency_p50_ms = float(np.percentile(latencies, 50, method="inverted_cdf"))
    stats.latency_p95_ms = float(np.percentile(latencies, 95, method="inverted_cdf"))
    stats.jitter_ms = float(np.abs(np.diff(latencies)).mean()) if n_delivered > 1 else 0.0
    return stats


def compute_all_flow_stats(records: Sequence[PacketRecord], slot_duration_ms: float) -> list[FlowStats]:
    return [compute_flow_stats(records, c, slot_duration_ms) for c in REPORTED_CLASSES]


def drops_by_reason(records: Iterable[PacketRecord]) -> dict[str, dict[str, int]]:
    """flow class -> outcome -> count, for every record that did not end Delivered."""
    drops: dict[str, dict[str, int]] = {}
    for record in records:
        if record.delivered or record.outcome is None:
            continue
        per_class = drops.setdefault(record.flow_class.value, {})
        per_class[record.outcome] = per_class.get(record.outcome, 0) + 1
    return {k: dict(sorted(v.items())) for k, v in sorted(drops.items())}


def summarize_runs(mode: str, runs: Sequence[RunReport]) -> list[MetricSummary]:
    """Mean and sample stddev of every metric across runs; runs with no value are skipped."""
    summary = []
    for flow_class in REPORTED_CLASSES:
        for metric in SUMMARY_METRICS:
            values = []
            for run in runs:
                stats = run.stats_for(flow_class)
                value = getattr(stats, metric) if stats is not None else None
                if value is not None:
                    values.append(value)
            row = MetricSummary(mode=mode, flow_class=flow_class, metric=metric, n_runs=len(values))
            if values:
                arr = np.asarray(values, dtype=float)
                row.mean = float(arr.mean())
                row.stddev = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
            summary.append(row)
    return summary
