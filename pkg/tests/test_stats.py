import math

import pytest

from app.models.record import DELIVERED, PacketRecord
from app.models.schedule import DropReason, FlowClass
from app.schemas.report import FlowStats, RunReport
from app.services.stats import (
    CONTROL,
    REPORTED_CLASSES,
    compute_all_flow_stats,
    compute_flow_stats,
    drops_by_reason,
    summarize_runs,
)


def rec(packet_id, enqueue, latency=None, flow_class=FlowClass.APP, outcome=None):
    if latency is not None:
        return PacketRecord(packet_id, flow_class, 3, 0, enqueue, enqueue + latency, DELIVERED)
    return PacketRecord(packet_id, flow_class, 3, 0, enqueue, outcome=outcome)


def test_constant_latency_has_zero_jitter():
    stats = compute_flow_stats([rec(i, i * 100, 10) for i in range(3)], FlowClass.APP, 10.0)
    assert stats.latency_mean_ms == 100.0
    assert stats.jitter_ms == 0.0


def test_jitter_is_mean_absolute_step():
    records = [rec(1, 0, 1), rec(2, 100, 2), rec(3, 200, 1)]
    assert compute_flow_stats(records, FlowClass.APP, 10.0).jitter_ms == pytest.approx(10.0)


def test_jitter_follows_delivery_order():
    # packet 2 overtakes packet 1
    records = [rec(1, 0, 50), rec(2, 10, 10), rec(3, 100, 50)]
    stats = compute_flow_stats(records, FlowClass.APP, 1.0)
    # delivery order: 2 (10), 1 (50), 3 (50)
    assert stats.jitter_ms == pytest.approx(20.0)


def test_pdr_and_nearest_rank_percentiles():
    records = [rec(i, i * 10, i) for i in range(1, 10)]
    records.append(rec(10, 500, outcome=DropReason.RETRY_LIMIT.value))
    stats = compute_flow_stats(records, FlowClass.APP, 1.0)
    assert stats.n_sent == 10 and stats.n_delivered == 9
    assert stats.pdr == pytest.approx(0.9)
    assert stats.latency_p50_ms == 5.0
    assert stats.latency_p95_ms == 9.0


def test_class_without_deliveries():
    stats = compute_flow_stats([rec(1, 0, outcome="QueueOverflow")], FlowClass.FTQ, 10.0)
    assert stats.n_sent == 0 and stats.pdr is None
    stats = compute_flow_stats([rec(1, 0, outcome="QueueOverflow")], FlowClass.APP, 10.0)
    assert stats.pdr == 0.0
    assert stats.latency_mean_ms is None and stats.jitter_ms is None
    assert stats.as_row()["latency_mean_ms"] == ""


def test_control_class_merges_nsu_and_ftq():
    records = [
        rec(1, 0, 4, FlowClass.NSU),
        rec(2, 10, 6, FlowClass.FTQ),
        rec(3, 20, 5, FlowClass.APP),
    ]
    stats = compute_flow_stats(records, CONTROL, 10.0)
    assert stats.flow_class == CONTROL
    assert stats.n_delivered == 2
    assert stats.latency_mean_ms == 50.0
    assert [s.flow_class for s in compute_all_flow_stats(records, 10.0)] == list(REPORTED_CLASSES)


def test_drops_by_reason_skips_delivered_and_live_records():
    records = [
        rec(1, 0, 3),
        rec(2, 0, outcome="QueueOverflow"),
        rec(3, 0, outcome="QueueOverflow"),
        rec(4, 0, outcome="QueryTimeout", flow_class=FlowClass.FTQ),
        rec(5, 0),
    ]
    assert drops_by_reason(records) == {"App": {"QueueOverflow": 2}, "Ftq": {"QueryTimeout": 1}}


def _run(seed, pdr):
    return RunReport(
        mode="SdnShared",
        seed=seed,
        slot_duration_ms=10.0,
        warmup_end_asn=0,
        end_asn=1000,
        flow_stats=[FlowStats(flow_class="App", n_sent=10, n_delivered=int(pdr * 10), pdr=pdr)],
    )


def test_summary_uses_sample_stddev():
    summary = summarize_runs("SdnShared", [_run(1, 0.8), _run(2, 1.0)])
    row = next(m for m in summary if m.flow_class == "App" and m.metric == "pdr")
    assert row.mean == pytest.approx(0.9)
    assert row.stddev == pytest.approx(math.sqrt(0.02))
    assert row.n_runs == 2
    missing = next(m for m in summary if m.flow_class == "Nsu" and m.metric == "pdr")
    assert missing.n_runs == 0 and missing.mean is None
    assert len(summary) == len(REPORTED_CLASSES) * 5


def test_single_run_summary_has_zero_stddev():
    (row,) = [m for m in summarize_runs("NoSdnRpl", [_run(1, 0.7)]) if m.metric == "pdr" and m.n_runs]
    assert row.mean == pytest.approx(0.7)
    assert row.stddev == 0.0
