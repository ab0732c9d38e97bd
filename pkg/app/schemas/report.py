from pydantic import BaseModel, Field

FLOW_STATS_COLUMNS = (
    "flow_class",
    "n_sent",
    "n_delivered",
    "pdr",
    "latency_mean_ms",
    "latency_p50_ms",
    "latency_p95_ms",
    "jitter_ms",
)

SUMMARY_COLUMNS = ("mode", "flow_class", "metric", "mean", "stddev", "n_runs")

SUMMARY_METRICS = ("pdr", "latency_mean_ms", "latency_p50_ms", "latency_p95_ms", "jitter_ms")


class FlowStats(BaseModel):
    flow_class: str
    n_sent: int = Field(..., ge=0)
    n_delivered: int = Field(..., ge=0)
    pdr: float | None = None
    latency_mean_ms: float | None = None
    latency_p50_ms: float | None = None
    latency_p95_ms: float | None = None
    jitter_ms: float | None = Field(None, ge=0)

    def as_row(self) -> dict[str, object]:
        return {k: "" if v is None else v for k, v in self.model_dump().items()}


class RunReport(BaseModel):
    mode: str
    seed: int
    slot_duration_ms: float
    warmup_end_asn: int
    end_asn: int
    flow_stats: list[FlowStats]
    drops: dict[str, dict[str, int]] = Field(default_factory=dict, description="flow class -> reason -> count")
    audit_violations: int = 0
    join_states: dict[int, str] = Field(default_factory=dict)
    stale_nodes: dict[int, float] = Field(default_factory=dict)
    traffic_shape: dict[int, dict[str, float | None]] = Field(default_factory=dict)
    ftq_causes: dict[str, int] = Field(default_factory=dict)

    def stats_for(self, flow_class: str) -> FlowStats | None:
        return next((s for s in self.flow_stats if s.flow_class == flow_class), None)


class MetricSummary(BaseModel):
    mode: str
    flow_class: str
    metric: str
    mean: float | None = None
    stddev: float | None = None
    n_runs: int = 0


class ExperimentReport(BaseModel):
    mode: str
    seeds: list[int]
    runs: list[RunReport]
    summary: list[MetricSummary]

    def metric(self, flow_class: str, metric: str) -> MetricSummary | None:
        return next(
            (m for m in self.summary if m.flow_class == flow_class and m.metric == metric),
            None,
        )


class Verdict(BaseModel):
    check: str
    passed: bool | None = Field(None, description="None when a metric was unavailable")
    detail: str


class ComparisonReport(BaseModel):
    seeds: list[int]
    experiments: dict[str, ExperimentReport]
    verdicts: list[Verdict]


class RunRequest(BaseModel):
    scenario: str = Field(..., description="Scenario file text")
    seeds: list[int] | None = Field(None, description="Explicit seeds; defaults to the scenario seed")
    duration: float | None = Field(None, gt=0, description="Override the measured duration (seconds)")


class ScheduleRequest(BaseModel):
    scenario: str = Field(..., description="Scenario file text")


class ScheduleResponse(BaseModel):
    slotframe_length: int
    channel_count: int
    grid: str
